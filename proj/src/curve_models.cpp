#include "runrace/curve_models.hpp"

#include <algorithm>
#include <cmath>

#include "runrace/errors.hpp"

namespace runrace {

namespace {

const char* kFamilyNames[kFamilyCount] = {
    "vapor_pressure", "pow3", "log_log_linear", "hill3", "log_power",
    "pow4",           "mmf",  "exp4",           "janoschek", "weibull",
    "ilog2",
};

double safe_log_t(int t_max) { return std::log(std::max(2.0, static_cast<double>(t_max))); }

}  // namespace

const char* family_name(FamilyId id) { return kFamilyNames[static_cast<int>(id)]; }

FamilyId family_from_name(const std::string& name) {
    for (int i = 0; i < kFamilyCount; ++i) {
        if (name == kFamilyNames[i]) return static_cast<FamilyId>(i);
    }
    throw DomainError("unknown model family: " + name);
}

// Bound boxes, one family at a time. Y = y_cap (>= 1), LT = ln(max(t_max, 2)).
// Each box is chosen so the family value over t in [1, t_max] provably stays
// inside [-Y, Y]:
//
//   vapor_pressure  exponent a + b/x + c*ln x <= a + 1 + 0.25*LT <= ln Y,
//                   and > a - 1 - 0.25*LT - ... > -inf, so 0 < f <= Y.
//   pow3            x^-alpha in (0, 1], so |f| <= |c| + |a| <= Y.
//   log_log_linear  argument in [e^-E, e^E] with E = min(Y, 6), so |f| <= Y.
//   hill3           x^eta/(kappa^eta + x^eta) in (0, 1), so f in [0, ymax].
//   log_power       denominator > 1, so f in (0, a].
//   pow4            a*x + b >= 1, so the power term is in (0, 1]; f in [c-1, c].
//   mmf             f is a convex mix of alpha and beta, both in [0, Y].
//   exp4            exp(-a*x^alpha + b) in (0, e^b] with e^b <= Y; f in [c-Y, c].
//   janoschek       exp(-kappa*x^d) in (0, 1]; f is a mix of alpha and beta.
//   weibull         exp(-(kappa*x)^d) in (0, 1); same mixing argument.
//   ilog2           a/ln(x+1) has magnitude <= |a|/ln 2 <= 0.37*Y.
ModelSpace ModelSpace::make(double y_cap, int t_max) {
    if (!(y_cap >= 1.0)) throw DomainError("ModelSpace: y_cap must be >= 1");
    if (t_max < 2) throw DomainError("ModelSpace: t_max must be >= 2");
    const double Y = y_cap;
    const double LT = safe_log_t(t_max);
    const double L = std::log(Y);
    const double E = std::min(Y, 6.0);           // log_log_linear value cap
    const double lll_b_lo = std::exp(-E);
    const double lll_b_hi = 1.0 + 0.5 * Y;
    const double lll_a_hi = std::max(0.0, (std::exp(E) - lll_b_hi) / LT);
    const double vp_a_hi = L - 1.0 - 0.25 * LT;

    ModelSpace space;
    space.y_cap = y_cap;
    space.t_max = t_max;
    space.families = {
        {FamilyId::VaporPressure,
         {{vp_a_hi - 12.0, vp_a_hi}, {-1.0, 1.0}, {-0.25, 0.25}},
         {"a", "b", "c"}},
        {FamilyId::Pow3,
         {{0.0, 0.5 * Y}, {-0.5 * Y, 0.5 * Y}, {0.01, 5.0}},
         {"c", "a", "alpha"}},
        {FamilyId::LogLogLinear,
         {{0.0, lll_a_hi}, {lll_b_lo, lll_b_hi}},
         {"a", "b"}},
        {FamilyId::Hill3,
         {{0.0, Y}, {0.1, 5.0}, {0.01, std::max(2.0, static_cast<double>(t_max))}},
         {"ymax", "eta", "kappa"}},
        {FamilyId::LogPower,
         {{0.0, Y}, {-2.0, LT + 2.0}, {-5.0, 5.0}},
         {"a", "b", "c"}},
        {FamilyId::Pow4,
         {{0.0, 0.5 * Y}, {0.0, Y}, {1.0, 10.0}, {0.01, 5.0}},
         {"c", "a", "b", "alpha"}},
        {FamilyId::Mmf,
         {{0.0, Y}, {0.0, Y}, {1e-3, 10.0}, {0.1, 5.0}},
         {"alpha", "beta", "kappa", "d"}},
        {FamilyId::Exp4,
         {{0.0, 0.5 * Y}, {0.0, 5.0}, {-10.0, L}, {0.1, 2.0}},
         {"c", "a", "b", "alpha"}},
        {FamilyId::Janoschek,
         {{0.0, Y}, {0.0, Y}, {1e-4, 10.0}, {0.1, 5.0}},
         {"alpha", "beta", "kappa", "d"}},
        {FamilyId::Weibull,
         {{0.0, Y}, {0.0, Y}, {1e-4, 10.0}, {0.1, 5.0}},
         {"alpha", "beta", "kappa", "d"}},
        {FamilyId::Ilog2,
         {{0.0, 0.5 * Y}, {-0.25 * Y, 0.25 * Y}},
         {"c", "a"}},
    };
    return space;
}

double ModelSpace::cap_for(std::span<const double> observed) {
    double mx = 0.0;
    for (double v : observed) mx = std::max(mx, v);
    return std::max(1.0, 10.0 * mx);
}

double eval_model(const ModelFamily& family, std::span<const double> params, double t) {
    if (static_cast<int>(params.size()) != family.arity()) {
        throw DomainError("eval_model: wrong parameter count for family");
    }
    if (!(t >= 1.0)) throw DomainError("eval_model: t must be >= 1");
    const double* p = params.data();
    switch (family.id) {
        case FamilyId::VaporPressure:
            return std::exp(p[0] + p[1] / t + p[2] * std::log(t));
        case FamilyId::Pow3:
            return p[0] - p[1] * std::pow(t, -p[2]);
        case FamilyId::LogLogLinear:
            return std::log(p[0] * std::log(t) + p[1]);
        case FamilyId::Hill3: {
            double te = std::pow(t, p[1]);
            return p[0] * te / (std::pow(p[2], p[1]) + te);
        }
        case FamilyId::LogPower:
            return p[0] / (1.0 + std::exp(p[2] * (std::log(t) - p[1])));
        case FamilyId::Pow4:
            return p[0] - std::pow(p[1] * t + p[2], -p[3]);
        case FamilyId::Mmf:
            return p[0] - (p[0] - p[1]) / (1.0 + std::pow(p[2] * t, p[3]));
        case FamilyId::Exp4:
            return p[0] - std::exp(-p[1] * std::pow(t, p[3]) + p[2]);
        case FamilyId::Janoschek:
            return p[0] - (p[0] - p[1]) * std::exp(-p[2] * std::pow(t, p[3]));
        case FamilyId::Weibull:
            return p[0] - (p[0] - p[1]) * std::exp(-std::pow(p[2] * t, p[3]));
        case FamilyId::Ilog2:
            return p[0] - p[1] / std::log(t + 1.0);
    }
    throw DomainError("eval_model: unreachable family id");
}

double eval_minimized(const ModelFamily& family, std::span<const double> params, double offset,
                      double t) {
    return offset - eval_model(family, params, t);
}

double eval_ensemble(const ModelSpace& space, const EnsembleSample& sample, double t) {
    if (sample.params.size() != space.families.size() ||
        sample.offsets.size() != space.families.size() ||
        sample.weights.size() != space.families.size()) {
        throw DomainError("eval_ensemble: sample does not match the model space");
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < space.families.size(); ++k) {
        acc += sample.weights[k] *
               eval_minimized(space.families[k], sample.params[k], sample.offsets[k], t);
    }
    return acc;
}

std::vector<double> init_params(const ModelFamily& family, Rng& rng) {
    std::vector<double> out(family.bounds.size());
    for (std::size_t i = 0; i < family.bounds.size(); ++i) {
        out[i] = rng.uniform(family.bounds[i].lo, family.bounds[i].hi);
    }
    return out;
}

double init_offset(const ModelSpace& space, const ModelFamily& family,
                   std::span<const double> params, Rng& rng) {
    double f1 = eval_model(family, params, 1.0);
    double lo = std::clamp(f1, 0.0, space.y_cap);
    double hi = std::clamp(f1 + space.y_cap, 0.0, space.y_cap);
    return rng.uniform(lo, hi);
}

}  // namespace runrace
