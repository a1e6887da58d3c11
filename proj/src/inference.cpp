#include "runrace/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "runrace/errors.hpp"
#include "runrace/rng.hpp"
#include "runrace/stats.hpp"

namespace runrace {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kSigmaFloor = 1e-4;
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kWeightTolerance = 1e-9;

double log_likelihood_from_ssr(double ssr, double sigma, int m) {
    return -0.5 * m * kLog2Pi - m * std::log(sigma) - ssr / (2.0 * sigma * sigma);
}

void softmax(std::span<const double> z, std::vector<double>& w) {
    double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    w.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        w[i] = std::exp(z[i] - zmax);
        sum += w[i];
    }
    for (double& wi : w) wi /= sum;
}

void recenter(std::vector<double>& z) {
    double m = 0.0;
    for (double v : z) m += v;
    m /= static_cast<double>(z.size());
    for (double& v : z) v -= m;
}

// Random-walk Metropolis chain over the full ensemble state. Value rows
// F[k][i] = f_k(epoch i+1) are cached per family; only the proposed family's
// row is re-evaluated, the weighted recombination is plain arithmetic.
//
// Move blocks cycle deterministically: 11 family blocks (params + offset),
// one weight-logit block, one log-sigma block. Proposal scales self-tune
// during burn-in only; the kernel is frozen before the first kept sample.
//
// Family moves are level-anchored: when the parameters move, the offset
// co-moves by the change in the row mean, so the proposed curve keeps the
// fitted level and only the shape is in question. The co-move is a
// deterministic shift shared by the forward and reverse proposals, so the
// kernel stays symmetric and the acceptance ratio is the posterior ratio.
// Without it the likelihood (sigma near the noise floor, offsets on a box
// ten times wider than the data) rejects virtually every joint jump and the
// chain never leaves its starting basin.
struct Chain {
    const ModelSpace& space;
    const std::vector<double>& y;
    int m;
    Rng& rng;

    std::vector<std::vector<double>> params;
    std::vector<double> offsets;
    std::vector<double> z;
    std::vector<double> weights;
    double sigma = 0.0;

    std::vector<std::vector<double>> F;   // cached family values at observed epochs
    std::vector<double> yhat;             // current ensemble values
    double ssr = 0.0;
    double loglik = kNegInf;

    // scratch
    std::vector<double> row_scratch, yhat_scratch, params_scratch, z_scratch, w_scratch;

    Chain(const ModelSpace& s, const std::vector<double>& obs, Rng& r)
        : space(s), y(obs), m(static_cast<int>(obs.size())), rng(r) {}

    bool eval_row(const ModelFamily& fam, std::span<const double> p, std::vector<double>& out) {
        out.resize(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) {
            double v = eval_model(fam, p, static_cast<double>(i + 1));
            if (!std::isfinite(v)) return false;
            out[static_cast<std::size_t>(i)] = v;
        }
        return true;
    }

    // yhat_i = sum_k w_k * (offset_k - F[k][i]), with one row optionally
    // overridden by a proposal.
    void recombine(const std::vector<double>& w, const std::vector<double>& offs,
                   int override_k, const std::vector<double>& override_row,
                   const double override_offset, std::vector<double>& out, double& out_ssr) const {
        out.assign(static_cast<std::size_t>(m), 0.0);
        for (int k = 0; k < kFamilyCount; ++k) {
            const std::vector<double>& row = (k == override_k) ? override_row : F[static_cast<std::size_t>(k)];
            double off = (k == override_k) ? override_offset : offs[static_cast<std::size_t>(k)];
            double wk = w[static_cast<std::size_t>(k)];
            for (int i = 0; i < m; ++i) {
                out[static_cast<std::size_t>(i)] += wk * (off - row[static_cast<std::size_t>(i)]);
            }
        }
        out_ssr = 0.0;
        for (int i = 0; i < m; ++i) {
            double r = y[static_cast<std::size_t>(i)] - out[static_cast<std::size_t>(i)];
            out_ssr += r * r;
        }
    }

    // Params are uniform draws; each family's offset is then set so its
    // curve passes through the observed mean, and sigma starts at the
    // residual scale of that state. A level-blind start strands the chain
    // far from the data with burn-in too short to walk back.
    void draw_state() {
        params.resize(kFamilyCount);
        offsets.resize(kFamilyCount);
        z.resize(kFamilyCount);
        F.resize(kFamilyCount);
        double obs_mean = mean(y);
        for (int k = 0; k < kFamilyCount; ++k) {
            params[static_cast<std::size_t>(k)] = init_params(space.families[static_cast<std::size_t>(k)], rng);
            double anchor = 0.0;
            if (eval_row(space.families[static_cast<std::size_t>(k)], params[static_cast<std::size_t>(k)],
                         F[static_cast<std::size_t>(k)])) {
                anchor = obs_mean + row_mean(F[static_cast<std::size_t>(k)]);
            } else {
                F[static_cast<std::size_t>(k)].assign(static_cast<std::size_t>(m), 0.0);
            }
            offsets[static_cast<std::size_t>(k)] = std::clamp(anchor, 0.0, space.y_cap);
            z[static_cast<std::size_t>(k)] = 0.7 * rng.normal();
        }
        recenter(z);
        softmax(z, weights);
        recombine(weights, offsets, -1, {}, 0.0, yhat, ssr);
        sigma = std::clamp(std::sqrt(ssr / static_cast<double>(m)), 1e-3, space.y_cap);
        loglik = log_likelihood_from_ssr(ssr, sigma, m);
    }

    void refresh_caches() {
        F.resize(kFamilyCount);
        for (int k = 0; k < kFamilyCount; ++k) {
            eval_row(space.families[static_cast<std::size_t>(k)], params[static_cast<std::size_t>(k)],
                     F[static_cast<std::size_t>(k)]);
        }
        recombine(weights, offsets, -1, {}, 0.0, yhat, ssr);
        loglik = log_likelihood_from_ssr(ssr, sigma, m);
    }

    double row_mean(const std::vector<double>& row) const {
        double s = 0.0;
        for (double v : row) s += v;
        return s / static_cast<double>(row.size());
    }

    EnsembleSample snapshot() const {
        EnsembleSample s;
        s.params = params;
        s.offsets = offsets;
        s.weights = weights;
        s.noise_sigma = sigma;
        return s;
    }

    double value_at(double t) const {
        double acc = 0.0;
        for (int k = 0; k < kFamilyCount; ++k) {
            acc += weights[static_cast<std::size_t>(k)] *
                   (offsets[static_cast<std::size_t>(k)] -
                    eval_model(space.families[static_cast<std::size_t>(k)],
                               params[static_cast<std::size_t>(k)], t));
        }
        return acc;
    }
};

struct ChainOutput {
    ModelSpace space;
    std::vector<EnsembleSample> samples;
    std::vector<double> values_at_horizon;
    std::vector<double> fitted_mean;
};

ChainOutput run_chain(const LearningCurve& curve, const InferenceConfig& config) {
    config.validate();
    if (curve.observed() < 1) {
        throw InsufficientDataError("mh_sample: curve has no observations");
    }
    if (curve.horizon_T < 2) throw DomainError("mh_sample: curve horizon must be >= 2");

    ChainOutput out;
    out.space = ModelSpace::make(ModelSpace::cap_for(curve.values), curve.horizon_T);
    const ModelSpace& space = out.space;
    const double Y = space.y_cap;

    Rng rng(config.seed);
    Chain chain(space, curve.values, rng);

    // Start from the best of a handful of uniform draws; a random 59-dim
    // point is almost always a terrible fit and burn-in is finite.
    constexpr int kInitDraws = 16;
    bool have = false;
    Chain best(space, curve.values, rng);
    for (int attempt = 0; attempt < kInitDraws; ++attempt) {
        chain.draw_state();
        chain.refresh_caches();
        if (!have || chain.loglik > best.loglik) {
            best.params = chain.params;
            best.offsets = chain.offsets;
            best.z = chain.z;
            best.weights = chain.weights;
            best.sigma = chain.sigma;
            best.loglik = chain.loglik;
            have = true;
        }
    }
    chain.params = best.params;
    chain.offsets = best.offsets;
    chain.z = best.z;
    chain.weights = best.weights;
    chain.sigma = best.sigma;
    chain.refresh_caches();

    const int kBlocks = kFamilyCount + 2;  // families, weights, sigma
    auto scale_for = [&](int idx) {
        const auto& s = config.proposal_scales;
        return s.size() == 1 ? s[0] : s[static_cast<std::size_t>(idx) % s.size()];
    };

    std::vector<double> mult(static_cast<std::size_t>(kBlocks), 1.0);
    std::vector<int> proposed(static_cast<std::size_t>(kBlocks), 0);
    std::vector<int> accepted(static_cast<std::size_t>(kBlocks), 0);

    const int kept_target = (config.chain_length - config.burn_in) / config.thinning;
    out.samples.reserve(static_cast<std::size_t>(kept_target));
    out.values_at_horizon.reserve(static_cast<std::size_t>(kept_target));
    std::vector<double> fitted_sum(static_cast<std::size_t>(chain.m), 0.0);

    for (int iter = 1; iter <= config.chain_length; ++iter) {
        int b = (iter - 1) % kBlocks;
        ++proposed[static_cast<std::size_t>(b)];
        bool accept = false;

        if (b < kFamilyCount) {
            const ModelFamily& fam = space.families[static_cast<std::size_t>(b)];
            double frac = scale_for(b) * mult[static_cast<std::size_t>(b)];
            chain.params_scratch = chain.params[static_cast<std::size_t>(b)];
            bool inside = true;
            for (int j = 0; j < fam.arity(); ++j) {
                const ParamBounds& pb = fam.bounds[static_cast<std::size_t>(j)];
                double step = frac * (pb.hi - pb.lo) * chain.rng.normal();
                double v = chain.params_scratch[static_cast<std::size_t>(j)] + step;
                chain.params_scratch[static_cast<std::size_t>(j)] = v;
                if (v < pb.lo || v > pb.hi) inside = false;
            }
            // Level jitter rides on the current sigma, which no family block
            // touches, so the scale is the same in both directions.
            double jitter = frac * 3.0 * chain.sigma * chain.rng.normal();
            if (inside && chain.eval_row(fam, chain.params_scratch, chain.row_scratch)) {
                double off = chain.offsets[static_cast<std::size_t>(b)] +
                             (chain.row_mean(chain.row_scratch) -
                              chain.row_mean(chain.F[static_cast<std::size_t>(b)])) +
                             jitter;
                if (off >= 0.0 && off <= Y) {
                    double new_ssr = 0.0;
                    chain.recombine(chain.weights, chain.offsets, b, chain.row_scratch, off,
                                    chain.yhat_scratch, new_ssr);
                    double ll = log_likelihood_from_ssr(new_ssr, chain.sigma, chain.m);
                    if (std::log(chain.rng.uniform01() + 1e-300) < ll - chain.loglik) {
                        chain.params[static_cast<std::size_t>(b)] = chain.params_scratch;
                        chain.offsets[static_cast<std::size_t>(b)] = off;
                        chain.F[static_cast<std::size_t>(b)] = chain.row_scratch;
                        chain.yhat = chain.yhat_scratch;
                        chain.ssr = new_ssr;
                        chain.loglik = ll;
                        accept = true;
                    }
                }
            }
        } else if (b == kFamilyCount) {
            // weight logits; softmax keeps the simplex constraint implicit
            double s = scale_for(b) * mult[static_cast<std::size_t>(b)] * 3.0;
            chain.z_scratch = chain.z;
            for (double& v : chain.z_scratch) v += s * chain.rng.normal();
            recenter(chain.z_scratch);
            softmax(chain.z_scratch, chain.w_scratch);
            double new_ssr = 0.0;
            chain.recombine(chain.w_scratch, chain.offsets, -1, {}, 0.0, chain.yhat_scratch,
                            new_ssr);
            double ll = log_likelihood_from_ssr(new_ssr, chain.sigma, chain.m);
            if (std::log(chain.rng.uniform01() + 1e-300) < ll - chain.loglik) {
                chain.z = chain.z_scratch;
                chain.weights = chain.w_scratch;
                chain.yhat = chain.yhat_scratch;
                chain.ssr = new_ssr;
                chain.loglik = ll;
                accept = true;
            }
        } else {
            // log-sigma walk; the sigma'/sigma factor is the change of
            // variables back to the uniform-in-sigma prior
            double s = scale_for(b) * mult[static_cast<std::size_t>(b)] * 2.0;
            double cand = chain.sigma * std::exp(s * chain.rng.normal());
            if (cand > kSigmaFloor && cand <= Y) {
                double ll = log_likelihood_from_ssr(chain.ssr, cand, chain.m);
                double log_alpha = ll - chain.loglik + std::log(cand / chain.sigma);
                if (std::log(chain.rng.uniform01() + 1e-300) < log_alpha) {
                    chain.sigma = cand;
                    chain.loglik = ll;
                    accept = true;
                }
            }
        }

        if (accept) ++accepted[static_cast<std::size_t>(b)];

        if (iter <= config.burn_in) {
            if (proposed[static_cast<std::size_t>(b)] >= 20) {
                double rate = static_cast<double>(accepted[static_cast<std::size_t>(b)]) /
                              static_cast<double>(proposed[static_cast<std::size_t>(b)]);
                if (rate > 0.35) mult[static_cast<std::size_t>(b)] *= 1.25;
                if (rate < 0.15) mult[static_cast<std::size_t>(b)] *= 0.8;
                mult[static_cast<std::size_t>(b)] =
                    std::clamp(mult[static_cast<std::size_t>(b)], 1e-3, 30.0);
                proposed[static_cast<std::size_t>(b)] = 0;
                accepted[static_cast<std::size_t>(b)] = 0;
            }
        } else if ((iter - config.burn_in) % config.thinning == 0) {
            out.samples.push_back(chain.snapshot());
            out.values_at_horizon.push_back(chain.value_at(static_cast<double>(curve.horizon_T)));
            for (int i = 0; i < chain.m; ++i) {
                fitted_sum[static_cast<std::size_t>(i)] += chain.yhat[static_cast<std::size_t>(i)];
            }
        }
    }

    out.fitted_mean.resize(static_cast<std::size_t>(chain.m));
    for (int i = 0; i < chain.m; ++i) {
        out.fitted_mean[static_cast<std::size_t>(i)] =
            fitted_sum[static_cast<std::size_t>(i)] / static_cast<double>(out.samples.size());
    }
    return out;
}

}  // namespace

const char* validity_reason_name(ValidityReason r) {
    switch (r) {
        case ValidityReason::Ok: return "ok";
        case ValidityReason::NegativeLoss: return "negative-loss";
        case ValidityReason::LowCorrelation: return "low-correlation";
        case ValidityReason::InsufficientData: return "insufficient-data";
    }
    return "ok";
}

void InferenceConfig::validate() const {
    if (chain_length < 1) throw DomainError("InferenceConfig: chain_length must be >= 1");
    if (burn_in < 0 || burn_in >= chain_length) {
        throw DomainError("InferenceConfig: burn_in must be in [0, chain_length)");
    }
    if (thinning < 1) throw DomainError("InferenceConfig: thinning must be >= 1");
    if ((chain_length - burn_in) / thinning < 1) {
        throw DomainError("InferenceConfig: chain too short to keep any sample");
    }
    if (proposal_scales.empty()) throw DomainError("InferenceConfig: proposal_scales empty");
    for (double s : proposal_scales) {
        if (!(s > 0.0)) throw DomainError("InferenceConfig: proposal scales must be positive");
    }
    if (!(quantile_delta > 0.0 && quantile_delta <= 1.0)) {
        throw DomainError("InferenceConfig: quantile_delta must be in (0, 1]");
    }
}

double log_likelihood(const ModelSpace& space, const EnsembleSample& sample,
                      const LearningCurve& curve) {
    if (curve.observed() < 1) throw InsufficientDataError("log_likelihood: empty curve");
    if (!(sample.noise_sigma > 0.0)) return kNegInf;
    double ssr = 0.0;
    for (int i = 0; i < curve.observed(); ++i) {
        double fitted = eval_ensemble(space, sample, static_cast<double>(i + 1));
        if (!std::isfinite(fitted)) return kNegInf;
        double r = curve.values[static_cast<std::size_t>(i)] - fitted;
        ssr += r * r;
    }
    return log_likelihood_from_ssr(ssr, sample.noise_sigma, curve.observed());
}

double log_prior(const ModelSpace& space, const EnsembleSample& sample) {
    if (sample.params.size() != space.families.size() ||
        sample.offsets.size() != space.families.size() ||
        sample.weights.size() != space.families.size()) {
        return kNegInf;
    }
    double wsum = 0.0;
    for (std::size_t k = 0; k < space.families.size(); ++k) {
        const ModelFamily& fam = space.families[k];
        if (sample.params[k].size() != fam.bounds.size()) return kNegInf;
        for (std::size_t j = 0; j < fam.bounds.size(); ++j) {
            double v = sample.params[k][j];
            if (!(v >= fam.bounds[j].lo && v <= fam.bounds[j].hi)) return kNegInf;
        }
        if (!(sample.offsets[k] >= 0.0 && sample.offsets[k] <= space.y_cap)) return kNegInf;
        if (!(sample.weights[k] >= 0.0)) return kNegInf;
        wsum += sample.weights[k];
    }
    if (std::abs(wsum - 1.0) > kWeightTolerance) return kNegInf;
    if (!(sample.noise_sigma > kSigmaFloor && sample.noise_sigma <= space.y_cap)) return kNegInf;
    return 0.0;
}

McmcResult mh_sample(const LearningCurve& curve, const InferenceConfig& config) {
    ChainOutput out = run_chain(curve, config);
    return McmcResult{std::move(out.space), std::move(out.samples)};
}

Prediction predict_at(const ModelSpace& space, std::span<const EnsembleSample> samples, double t,
                      double quantile_delta) {
    if (samples.empty()) throw DomainError("predict_at: no posterior samples");
    if (!(quantile_delta >= 0.0 && quantile_delta <= 1.0)) {
        throw DomainError("predict_at: delta must be in [0, 1]");
    }
    Prediction p;
    p.samples.reserve(samples.size());
    for (const EnsembleSample& s : samples) {
        p.samples.push_back(eval_ensemble(space, s, t));
    }
    p.point_estimate = mean(p.samples);
    p.conservative_estimate = nearest_rank_quantile(p.samples, 1.0 - quantile_delta);
    return p;
}

double prob_below(const Prediction& prediction, double threshold) {
    if (prediction.samples.empty()) throw DomainError("prob_below: no samples");
    std::size_t below = 0;
    for (double v : prediction.samples) {
        if (v < threshold) ++below;
    }
    return static_cast<double>(below) / static_cast<double>(prediction.samples.size());
}

std::pair<bool, ValidityReason> check_validity(const Prediction& prediction,
                                               const LearningCurve& curve,
                                               std::span<const double> fitted_mean) {
    if (curve.observed() < 3) return {false, ValidityReason::InsufficientData};
    if (prediction.point_estimate < 0.0) return {false, ValidityReason::NegativeLoss};
    if (static_cast<int>(fitted_mean.size()) != curve.observed()) {
        throw DomainError("check_validity: fitted curve length mismatch");
    }
    double corr = pearson_correlation(fitted_mean, curve.values);
    if (corr < 0.5) return {false, ValidityReason::LowCorrelation};
    return {true, ValidityReason::Ok};
}

CurveFit fit_curve(const LearningCurve& curve, const InferenceConfig& config) {
    ChainOutput out = run_chain(curve, config);
    return CurveFit{std::move(out.values_at_horizon), std::move(out.fitted_mean)};
}

Prediction prediction_from_fit(const CurveFit& fit, const LearningCurve& curve, double delta) {
    if (fit.values_at_horizon.empty()) throw DomainError("prediction_from_fit: empty fit");
    Prediction p;
    p.samples = fit.values_at_horizon;
    p.point_estimate = mean(p.samples);
    p.conservative_estimate = nearest_rank_quantile(p.samples, 1.0 - delta);
    auto [valid, reason] = check_validity(p, curve, fit.fitted_mean);
    p.valid = valid;
    p.reason = reason;
    return p;
}

}  // namespace runrace
