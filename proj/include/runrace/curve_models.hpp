#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "runrace/rng.hpp"

namespace runrace {

// Parametric curve families used to extrapolate validation-error traces.
// Every family models a quantity that grows toward an asymptote; decreasing
// error curves are obtained through the offset transform in eval_minimized.
enum class FamilyId {
    VaporPressure,  // exp(a + b/x + c*ln x)
    Pow3,           // c - a * x^-alpha
    LogLogLinear,   // ln(a*ln x + b)
    Hill3,          // ymax * x^eta / (kappa^eta + x^eta)
    LogPower,       // a / (1 + (x/e^b)^c)
    Pow4,           // c - (a*x + b)^-alpha
    Mmf,            // alpha - (alpha - beta) / (1 + (kappa*x)^d)
    Exp4,           // c - exp(-a*x^alpha + b)
    Janoschek,      // alpha - (alpha - beta) * exp(-kappa*x^d)
    Weibull,        // alpha - (alpha - beta) * exp(-(kappa*x)^d)
    Ilog2,          // c - a / ln(x + 1)
};

inline constexpr int kFamilyCount = 11;

const char* family_name(FamilyId id);
FamilyId family_from_name(const std::string& name);

struct ParamBounds {
    double lo;
    double hi;
};

struct ModelFamily {
    FamilyId id;
    std::vector<ParamBounds> bounds;        // closed per-parameter intervals
    std::vector<const char*> param_names;   // same order as bounds
    int arity() const { return static_cast<int>(bounds.size()); }
};

// The model space a curve is fitted in. Bounds are sized from (y_cap, t_max)
// so that every family value stays inside [-y_cap, y_cap] on t in [1, t_max];
// the per-family derivations live next to the bound constants in the .cpp.
struct ModelSpace {
    double y_cap;
    int t_max;
    std::vector<ModelFamily> families;  // always the 11 above, in enum order

    static ModelSpace make(double y_cap, int t_max);

    // y_cap rule: 10x the largest observed error, floored at 1 so the boxes
    // that contain unit-sized terms stay well-formed.
    static double cap_for(std::span<const double> observed);
};

// Raw family value f_theta(t). Finite for any params within bounds and any
// t >= 1 (checked property for t up to 1e4).
double eval_model(const ModelFamily& family, std::span<const double> params, double t);

// Minimized transform: offset - f_theta(t). Decreasing error curves come from
// growth curves this way; offset plays the role of an extra free parameter.
double eval_minimized(const ModelFamily& family, std::span<const double> params, double offset,
                      double t);

// One posterior state: all 11 families with their offsets, convex weights,
// and the Gaussian noise scale.
struct EnsembleSample {
    std::vector<std::vector<double>> params;  // [family][param]
    std::vector<double> offsets;              // [family], each in [0, y_cap]
    std::vector<double> weights;              // [family], >= 0, sums to 1
    double noise_sigma = 0.0;
};

// Weighted ensemble value sum_k w_k * (offset_k - f_k(t)).
double eval_ensemble(const ModelSpace& space, const EnsembleSample& sample, double t);

// Uniform draw within the family's bounds. Deterministic given the rng state.
std::vector<double> init_params(const ModelFamily& family, Rng& rng);

// Offset draw paired with params: uniform over the sub-interval of [0, y_cap]
// that puts the minimized value at t=1 inside [0, y_cap]. The interval is
// never empty because |f| <= y_cap holds on the bound box.
double init_offset(const ModelSpace& space, const ModelFamily& family,
                   std::span<const double> params, Rng& rng);

}  // namespace runrace
