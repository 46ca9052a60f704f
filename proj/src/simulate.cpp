#include "catfit/simulate.hpp"

#include <cmath>
#include <cstdio>

#include "catfit/rng.hpp"

namespace catfit {

void GeneratorSpec::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma))
    throw ValidationError("generator gamma must be >= 0");
  if (!(beta > 0.0)) throw ValidationError("generator beta must be positive");
  if (n_stimuli < 4) throw ValidationError("need at least 4 stimuli");
  if (n_features < 1) throw ValidationError("need at least 1 feature");
  if (trials_per_stimulus < 1) throw ValidationError("need at least 1 trial");
  if (layout != "gaussian" && layout != "xor")
    throw ValidationError("layout must be 'gaussian' or 'xor'");
  if (layout == "xor" && n_features < 2)
    throw ValidationError("xor layout needs at least 2 features");
  if (!(noise_sd > 0.0)) throw ValidationError("noise_sd must be positive");
}

namespace {

// Truth parameters: the requested gamma/beta, all other blocks at their
// standard initialization (fitted variances at the empirical shared
// variance, uniform attention, hyperplane from the empirical prototypes).
ParamVector truth_params(const GeneratorSpec& gen, const ModelSpec& spec,
                         const FrozenStats& stats, const FeatureMatrix& features,
                         const IndexList& all_rows) {
  ParamVector p = init_params(spec, stats);
  if (gen.gamma > 0.0) {
    p.theta[0] = std::log(gen.gamma);
  } else {
    p.theta[0] = -1e6;  // exp underflows to 0: exact random responding
  }
  switch (spec.variant) {
    case ModelVariant::ExemplarNoAttention:
    case ModelVariant::ExemplarAttention:
      p.theta[1] = std::log(gen.beta);
      break;
    case ModelVariant::HyperplaneNoBias:
    case ModelVariant::HyperplaneBias: {
      IndexList rows_a = features.rows_of_category(Category::A, all_rows);
      IndexList rows_b = features.rows_of_category(Category::B, all_rows);
      auto [v, bias] = hyperplane_from_prototypes(
          mean_of_rows(features.values, rows_a),
          mean_of_rows(features.values, rows_b));
      p.theta.segment(1, spec.n_features) = v;
      if (spec.variant == ModelVariant::HyperplaneBias)
        p.theta[1 + spec.n_features] = bias;
      break;
    }
    default:
      break;
  }
  return p;
}

}  // namespace

SimulatedData simulate_dataset(const GeneratorSpec& gen, std::uint64_t seed) {
  gen.validate();
  Rng feature_rng(seed, "sim-features");
  Rng judgment_rng(seed, "sim-judgments");

  SimulatedData out;
  auto& fm = out.features;
  fm.values.resize(gen.n_stimuli, gen.n_features);
  fm.ids.reserve(static_cast<std::size_t>(gen.n_stimuli));
  fm.labels.reserve(static_cast<std::size_t>(gen.n_stimuli));

  for (int i = 0; i < gen.n_stimuli; ++i) {
    char id[24];
    std::snprintf(id, sizeof(id), "s%05d", i);
    fm.ids.emplace_back(id);
    Category c = (i % 2 == 0) ? Category::A : Category::B;
    fm.labels.push_back(c);

    Vector mu = Vector::Zero(gen.n_features);
    if (gen.layout == "gaussian") {
      double offset = (c == Category::A ? -0.5 : 0.5) * gen.separation;
      mu.setConstant(offset);
    } else {
      // xor: alternate between the two clusters of each category
      bool flip = (i / 2) % 2 == 1;
      double a = gen.xor_arm;
      if (c == Category::A) {
        mu[0] = flip ? -a : a;
        mu[1] = flip ? -a : a;
      } else {
        mu[0] = flip ? -a : a;
        mu[1] = flip ? a : -a;
      }
    }
    for (int k = 0; k < gen.n_features; ++k)
      fm.values(i, k) = mu[k] + gen.noise_sd * feature_rng.next_normal();
  }
  fm.rebuild_index();

  ModelSpec spec{gen.model, fm.n_features()};
  IndexList all_rows = fm.all_rows();
  out.truth_state.spec = spec;
  out.truth_state.stats = freeze_stats(spec, fm, all_rows);
  out.truth_state.params =
      truth_params(gen, spec, *out.truth_state.stats, fm, all_rows);

  out.p_b = predict_p_b(out.truth_state, fm, all_rows);
  for (int i = 0; i < gen.n_stimuli; ++i) {
    long nb = judgment_rng.next_binomial(gen.trials_per_stimulus, out.p_b[i]);
    out.judgments.entries.push_back(
        {fm.ids[static_cast<std::size_t>(i)], gen.trials_per_stimulus - nb, nb});
  }
  out.judgments.rebuild_index();

  AlignedCounts counts = align_judgments(fm, out.judgments);
  out.truth_nll = negative_log_likelihood(out.truth_state, fm, counts, all_rows);
  return out;
}

nlohmann::json truth_json(const GeneratorSpec& gen, const SimulatedData& data,
                          std::uint64_t seed) {
  nlohmann::json j;
  j["generator"] = {{"model", ModelSpec{gen.model, gen.n_features}.name()},
                    {"gamma", gen.gamma},
                    {"beta", gen.beta},
                    {"n_stimuli", gen.n_stimuli},
                    {"n_features", gen.n_features},
                    {"trials_per_stimulus", gen.trials_per_stimulus},
                    {"layout", gen.layout},
                    {"separation", gen.separation},
                    {"noise_sd", gen.noise_sd},
                    {"xor_arm", gen.xor_arm}};
  j["seed"] = seed;
  j["truth_params"] = data.truth_state.params.to_json();
  j["truth_nll"] = data.truth_nll;
  j["truth_ll"] = -data.truth_nll;
  std::vector<double> pb(data.p_b.data(), data.p_b.data() + data.p_b.size());
  j["p_b"] = pb;
  return j;
}

}  // namespace catfit
