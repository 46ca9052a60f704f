// catfit: fits prototype and exemplar categorization models to two-choice
// human judgments over arbitrary feature representations, compares them,
// and learns similarity-matched feature reweightings.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"

#include "catfit/evaluation.hpp"
#include "catfit/fitting.hpp"
#include "catfit/simulate.hpp"
#include "catfit/transform.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliConfig {
  catfit::FitConfig fit;
  std::vector<double> lambda_grid = catfit::default_lambda_grid();
  catfit::LabelMap labels;
  catfit::GeneratorSpec gen;
  json raw = json::object();
};

void apply_config_json(const json& j, CliConfig* cfg) {
  auto get = [&](const char* key, auto& target) {
    if (j.contains(key)) target = j.at(key).get<std::decay_t<decltype(target)>>();
  };
  get("n_folds", cfg->fit.n_folds);
  get("batch_size", cfg->fit.batch_size);
  get("eval_every", cfg->fit.eval_every);
  get("max_steps", cfg->fit.max_steps);
  get("lr_grid", cfg->fit.lr_grid);
  get("adam_beta1", cfg->fit.adam_beta1);
  get("adam_beta2", cfg->fit.adam_beta2);
  get("adam_epsilon", cfg->fit.adam_epsilon);
  get("seed", cfg->fit.seed);
  get("n_splits", cfg->fit.n_splits);
  get("n_threads", cfg->fit.n_threads);
  get("lambda_grid", cfg->lambda_grid);
  get("label_a", cfg->labels.a);
  get("label_b", cfg->labels.b);
  if (j.contains("generator")) {
    const json& g = j.at("generator");
    if (g.contains("model")) {
      auto v = catfit::variant_from_name(g.at("model").get<std::string>());
      if (!v) {
        throw catfit::ValidationError("unknown generator model; valid names: " +
                                      catfit::valid_variant_names());
      }
      cfg->gen.model = *v;
    }
    auto gget = [&](const char* key, auto& target) {
      if (g.contains(key)) target = g.at(key).get<std::decay_t<decltype(target)>>();
    };
    gget("gamma", cfg->gen.gamma);
    gget("beta", cfg->gen.beta);
    gget("n_stimuli", cfg->gen.n_stimuli);
    gget("n_features", cfg->gen.n_features);
    gget("trials_per_stimulus", cfg->gen.trials_per_stimulus);
    gget("layout", cfg->gen.layout);
    gget("separation", cfg->gen.separation);
    gget("noise_sd", cfg->gen.noise_sd);
    gget("xor_arm", cfg->gen.xor_arm);
  }
}

CliConfig load_config(const std::string& path) {
  CliConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw catfit::ValidationError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw catfit::ValidationError("bad config JSON: " + std::string(e.what()));
  }
  cfg.raw = j;
  apply_config_json(j, &cfg);
  return cfg;
}

std::string iso_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw catfit::ValidationError("cannot open file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(catfit::fnv1a64(bytes)));
  return buf;
}

// Outputs land atomically: temp file in the same directory, then rename.
void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
  }
  fs::rename(tmp, path);
}

void write_json_atomic(const fs::path& path, const json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

struct RunContext {
  std::string command;
  fs::path out_dir;
  CliConfig cfg;
  json inputs = json::object();
  std::vector<std::string> outputs;
  std::string started_at;

  explicit RunContext(const std::string& cmd, const std::string& out,
                      const CliConfig& c)
      : command(cmd), out_dir(out), cfg(c), started_at(iso_now()) {
    fs::create_directories(out_dir);
  }

  void add_input(const std::string& name, const std::string& path) {
    inputs[name] = {{"path", path}, {"fnv1a64", file_digest(path)}};
  }

  void emit(const std::string& name, const json& j) {
    write_json_atomic(out_dir / name, j);
    outputs.push_back(name);
  }

  void emit_text(const std::string& name, const std::string& content) {
    write_file_atomic(out_dir / name, content);
    outputs.push_back(name);
  }

  void finish() {
    json m;
    m["command"] = command;
    m["tool_version"] = catfit::kVersion;
    m["seed"] = cfg.fit.seed;
    m["config"] = cfg.raw;
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    m["started_at"] = started_at;
    m["finished_at"] = iso_now();
    write_json_atomic(out_dir / "manifest.json", m);
  }
};

void print_warnings(const catfit::Warnings& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

catfit::ModelVariant resolve_model(const std::string& name) {
  auto v = catfit::variant_from_name(name);
  if (!v) {
    throw catfit::ValidationError("unknown model '" + name +
                                  "'; valid names: " +
                                  catfit::valid_variant_names());
  }
  return *v;
}

json fit_bundle_json(const catfit::FitResult& result) {
  json j;
  j["params"] = result.params_json();
  j["score"] = result.score_json();
  j["trajectories"] = result.trajectories_json();
  return j;
}

/*----------------------------------------------------------------------
  Subcommand bodies
----------------------------------------------------------------------*/

int run_fit(RunContext& ctx, const std::string& features_path,
            const std::string& judgments_path, const std::string& judgments_format,
            const std::string& model_name) {
  catfit::ModelVariant variant = resolve_model(model_name);
  ctx.add_input("features", features_path);
  ctx.add_input("judgments", judgments_path);

  auto features = catfit::load_features(features_path, ctx.cfg.labels);
  auto judgments = catfit::load_judgments(
      judgments_path,
      judgments_format == "trials" ? catfit::JudgmentMode::Trials
                                   : catfit::JudgmentMode::Counts,
      ctx.cfg.labels);

  catfit::ModelSpec spec{variant, features.n_features()};
  catfit::FitResult result =
      catfit::fit_model(spec, features, judgments, ctx.cfg.fit);
  print_warnings(result.notes);

  ctx.emit("params.json", result.params_json());
  ctx.emit("trajectories.json", result.trajectories_json());
  ctx.emit("score.json", result.score_json());
  ctx.finish();
  std::cout << spec.name() << ": LL " << catfit::format_double(result.final_ll)
            << ", AIC " << catfit::format_double(result.final_aic)
            << ", correlation "
            << catfit::format_double(result.final_correlation) << "\n";
  return 0;
}

int run_compare(RunContext& ctx, const std::string& features_path,
                const std::string& judgments_path,
                const std::string& judgments_format,
                std::vector<std::string> model_names,
                const std::string& baseline_path) {
  ctx.add_input("features", features_path);
  ctx.add_input("judgments", judgments_path);
  if (!baseline_path.empty()) ctx.add_input("baseline", baseline_path);

  auto features = catfit::load_features(features_path, ctx.cfg.labels);
  auto judgments = catfit::load_judgments(
      judgments_path,
      judgments_format == "trials" ? catfit::JudgmentMode::Trials
                                   : catfit::JudgmentMode::Counts,
      ctx.cfg.labels);

  std::vector<catfit::ModelVariant> variants;
  if (model_names.empty() ||
      (model_names.size() == 1 && model_names[0] == "all")) {
    variants = catfit::all_variants();
  } else {
    for (const auto& name : model_names) variants.push_back(resolve_model(name));
  }

  std::vector<catfit::ModelScore> scores;
  for (auto variant : variants) {
    catfit::ModelSpec spec{variant, features.n_features()};
    catfit::FitResult result =
        catfit::fit_model(spec, features, judgments, ctx.cfg.fit);
    print_warnings(result.notes);
    catfit::ModelScore score;
    score.name = spec.name();
    score.group = spec.report_group();
    score.ll = result.final_ll;
    score.aic = result.final_aic;
    score.correlation = result.final_correlation;
    score.k = spec.n_params();
    scores.push_back(score);
    ctx.emit(std::string("fit-") + spec.name() + ".json",
             fit_bundle_json(result));
  }

  if (!baseline_path.empty()) {
    auto baseline = catfit::load_baseline(baseline_path);
    catfit::Warnings warnings;
    scores.push_back(catfit::score_baseline(baseline, judgments,
                                            ctx.cfg.fit.n_splits,
                                            ctx.cfg.fit.seed, &warnings));
    print_warnings(warnings);
  }

  catfit::Warnings warnings;
  catfit::Reliability ceiling = catfit::split_half_reliability(
      judgments, ctx.cfg.fit.n_splits, ctx.cfg.fit.seed, &warnings);
  print_warnings(warnings);

  catfit::CompareReport report = catfit::compare_models(scores, &ceiling);
  ctx.emit("report.json", report.to_json());
  ctx.emit_text("report.txt", report.render_text());
  ctx.finish();
  std::cout << report.render_text();
  return 0;
}

int run_transform(RunContext& ctx, const std::string& features_path,
                  const std::string& similarities_path) {
  ctx.add_input("features", features_path);
  ctx.add_input("similarities", similarities_path);

  auto features = catfit::load_features(features_path, ctx.cfg.labels);
  catfit::Warnings warnings;
  auto ratings = catfit::load_similarities(similarities_path, &warnings);
  print_warnings(warnings);
  ratings.validate_against(features);

  catfit::SimilarityWeights weights = catfit::fit_similarity_weights(
      features, ratings, ctx.cfg.lambda_grid, ctx.cfg.fit.n_folds,
      ctx.cfg.fit.seed);

  catfit::FeatureMatrix transformed =
      catfit::apply_transform(features, weights.w);

  warnings.clear();
  double r2_before = catfit::similarity_fit_quality(
      features, ratings, catfit::Vector::Ones(features.n_features()), &warnings);
  double r2_after =
      catfit::similarity_fit_quality(features, ratings, weights.w, &warnings);
  print_warnings(warnings);

  // weights.csv
  std::string wcsv = "dim,weight\n";
  for (catfit::Index k = 0; k < weights.w.size(); ++k) {
    wcsv += std::to_string(k) + "," + catfit::format_double(weights.w[k]) + "\n";
  }
  ctx.emit_text("weights.csv", wcsv);

  {
    fs::path p = ctx.out_dir / "transformed_features.csv";
    catfit::write_features(p.string(), transformed, ctx.cfg.labels);
    ctx.outputs.push_back("transformed_features.csv");
  }

  // Pairwise distances over the rated subset, for external MDS tooling.
  std::vector<std::string> rated_ids;
  {
    std::set<std::string> seen;
    for (const auto& p : ratings.pairs) {
      seen.insert(p.id_a);
      seen.insert(p.id_b);
    }
    rated_ids.assign(seen.begin(), seen.end());
  }
  std::string dcsv = "id";
  for (const auto& id : rated_ids) dcsv += "," + id;
  dcsv += "\n";
  for (const auto& ida : rated_ids) {
    dcsv += ida;
    auto ra = transformed.values.row(transformed.row_of(ida));
    for (const auto& idb : rated_ids) {
      auto rb = transformed.values.row(transformed.row_of(idb));
      dcsv += "," + catfit::format_double((ra - rb).norm());
    }
    dcsv += "\n";
  }
  ctx.emit_text("distances.csv", dcsv);

  json tj;
  tj["lambda"] = weights.lambda;
  tj["cv_r_squared"] = weights.cv_score;
  tj["r_squared_untransformed"] = r2_before;
  tj["r_squared_transformed"] = r2_after;
  tj["n_pairs"] = ratings.n_pairs();
  ctx.emit("transform.json", tj);
  ctx.finish();
  std::cout << "lambda " << catfit::format_double(weights.lambda)
            << ", held-out R^2 " << catfit::format_double(weights.cv_score)
            << ", in-sample R^2 " << catfit::format_double(r2_after) << "\n";
  return 0;
}

int run_reliability(RunContext& ctx, const std::string& judgments_path,
                    const std::string& judgments_format) {
  ctx.add_input("judgments", judgments_path);
  auto judgments = catfit::load_judgments(
      judgments_path,
      judgments_format == "trials" ? catfit::JudgmentMode::Trials
                                   : catfit::JudgmentMode::Counts,
      ctx.cfg.labels);
  catfit::Warnings warnings;
  catfit::Reliability rel = catfit::split_half_reliability(
      judgments, ctx.cfg.fit.n_splits, ctx.cfg.fit.seed, &warnings);
  print_warnings(warnings);
  json j;
  j["raw_r"] = rel.raw_r;
  j["corrected_r"] = rel.corrected_r;
  j["n_splits"] = rel.n_splits;
  ctx.emit("reliability.json", j);
  ctx.finish();
  std::cout << "split-half r " << catfit::format_double(rel.raw_r)
            << ", corrected " << catfit::format_double(rel.corrected_r) << "\n";
  return 0;
}

int run_simulate(RunContext& ctx) {
  catfit::SimulatedData data =
      catfit::simulate_dataset(ctx.cfg.gen, ctx.cfg.fit.seed);
  {
    fs::path p = ctx.out_dir / "features.csv";
    catfit::write_features(p.string(), data.features, ctx.cfg.labels);
    ctx.outputs.push_back("features.csv");
  }
  {
    fs::path p = ctx.out_dir / "judgments.csv";
    catfit::write_judgments(p.string(), data.judgments);
    ctx.outputs.push_back("judgments.csv");
  }
  ctx.emit("truth.json", catfit::truth_json(ctx.cfg.gen, data, ctx.cfg.fit.seed));
  ctx.finish();
  std::cout << "simulated " << ctx.cfg.gen.n_stimuli << " stimuli x "
            << ctx.cfg.gen.trials_per_stimulus << " trials ("
            << catfit::ModelSpec{ctx.cfg.gen.model, ctx.cfg.gen.n_features}.name()
            << ", truth LL " << catfit::format_double(-data.truth_nll) << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"categorization model fitting toolkit"};
  app.require_subcommand(1);

  std::string features_path, judgments_path, similarities_path, baseline_path;
  std::string config_path, out_dir = "out";
  std::string judgments_format = "counts";
  std::vector<std::string> model_names;
  std::vector<double> lr_grid_flag, lambda_grid_flag;
  std::uint64_t seed_flag = 0;
  bool seed_given = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--out-dir", out_dir, "output directory");
    sub->add_option_function<std::uint64_t>(
           "--seed",
           [&](std::uint64_t v) {
             seed_flag = v;
             seed_given = true;
           },
           "root RNG seed");
  };

  CLI::App* fit = app.add_subcommand("fit", "fit one model variant");
  fit->add_option("--features", features_path)->required();
  fit->add_option("--judgments", judgments_path)->required();
  fit->add_option("--judgments-format", judgments_format)
      ->check(CLI::IsMember({"trials", "counts"}));
  fit->add_option("--model", model_names)->required();
  fit->add_option("--lr-grid", lr_grid_flag)->delimiter(',');
  add_common(fit);

  CLI::App* compare = app.add_subcommand("compare", "fit and rank model variants");
  compare->add_option("--features", features_path)->required();
  compare->add_option("--judgments", judgments_path)->required();
  compare->add_option("--judgments-format", judgments_format)
      ->check(CLI::IsMember({"trials", "counts"}));
  compare->add_option("--model", model_names,
                      "variants to fit (repeatable; default all)");
  compare->add_option("--baseline", baseline_path,
                      "external classifier probabilities CSV");
  compare->add_option("--lr-grid", lr_grid_flag)->delimiter(',');
  add_common(compare);

  CLI::App* transform =
      app.add_subcommand("transform", "fit similarity weights and re-embed");
  transform->add_option("--features", features_path)->required();
  transform->add_option("--similarities", similarities_path)->required();
  transform->add_option("--lambda-grid", lambda_grid_flag)->delimiter(',');
  add_common(transform);

  CLI::App* reliability =
      app.add_subcommand("reliability", "split-half reliability ceiling");
  reliability->add_option("--judgments", judgments_path)->required();
  reliability->add_option("--judgments-format", judgments_format)
      ->check(CLI::IsMember({"trials", "counts"}));
  add_common(reliability);

  CLI::App* simulate =
      app.add_subcommand("simulate", "generate synthetic features and judgments");
  simulate->add_option("--gen-model", model_names, "generator model variant");
  add_common(simulate);
  double gen_gamma = -1.0, gen_beta = -1.0, gen_sep = -1.0, gen_sd = -1.0,
         gen_arm = -1.0;
  int gen_n = -1, gen_d = -1, gen_trials = -1;
  std::string gen_layout;
  simulate->add_option("--gen-gamma", gen_gamma);
  simulate->add_option("--gen-beta", gen_beta);
  simulate->add_option("--n-stimuli", gen_n);
  simulate->add_option("--n-features", gen_d);
  simulate->add_option("--trials-per-stimulus", gen_trials);
  simulate->add_option("--layout", gen_layout)
      ->check(CLI::IsMember({"gaussian", "xor"}));
  simulate->add_option("--separation", gen_sep);
  simulate->add_option("--noise-sd", gen_sd);
  simulate->add_option("--xor-arm", gen_arm);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    CliConfig cfg = load_config(config_path);
    if (seed_given) cfg.fit.seed = seed_flag;
    if (!lr_grid_flag.empty()) cfg.fit.lr_grid = lr_grid_flag;
    if (!lambda_grid_flag.empty()) cfg.lambda_grid = lambda_grid_flag;

    if (simulate->parsed()) {
      if (!model_names.empty()) cfg.gen.model = resolve_model(model_names.back());
      if (gen_gamma >= 0.0) cfg.gen.gamma = gen_gamma;
      if (gen_beta >= 0.0) cfg.gen.beta = gen_beta;
      if (gen_n > 0) cfg.gen.n_stimuli = gen_n;
      if (gen_d > 0) cfg.gen.n_features = gen_d;
      if (gen_trials > 0) cfg.gen.trials_per_stimulus = gen_trials;
      if (!gen_layout.empty()) cfg.gen.layout = gen_layout;
      if (gen_sep >= 0.0) cfg.gen.separation = gen_sep;
      if (gen_sd > 0.0) cfg.gen.noise_sd = gen_sd;
      if (gen_arm >= 0.0) cfg.gen.xor_arm = gen_arm;
      RunContext ctx("simulate", out_dir, cfg);
      return run_simulate(ctx);
    }
    if (fit->parsed()) {
      if (model_names.size() != 1)
        throw catfit::ValidationError("fit takes exactly one --model");
      RunContext ctx("fit", out_dir, cfg);
      return run_fit(ctx, features_path, judgments_path, judgments_format,
                     model_names[0]);
    }
    if (compare->parsed()) {
      RunContext ctx("compare", out_dir, cfg);
      return run_compare(ctx, features_path, judgments_path, judgments_format,
                         model_names, baseline_path);
    }
    if (transform->parsed()) {
      RunContext ctx("transform", out_dir, cfg);
      return run_transform(ctx, features_path, similarities_path);
    }
    if (reliability->parsed()) {
      RunContext ctx("reliability", out_dir, cfg);
      return run_reliability(ctx, judgments_path, judgments_format);
    }
    throw catfit::ValidationError("no subcommand given");
  } catch (const catfit::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
