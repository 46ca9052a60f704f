#include "catfit/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>

#include "catfit/rng.hpp"

namespace catfit {

double aic(int k, double max_log_likelihood) {
  if (k < 0) throw ValidationError("aic: negative parameter count");
  return 2.0 * k - 2.0 * max_log_likelihood;
}

double spearman_brown(double r) { return 2.0 * r / (1.0 + r); }

namespace {

struct HalfSplit {
  std::vector<double> p1;  // proportion of B choices, first half
  std::vector<double> p2;
};

// Random half-split of every stimulus's trials. Choices are exchangeable
// within a stimulus, so drawing without replacement from the (n_A, n_B)
// urn reproduces a trial-level shuffle exactly.
HalfSplit split_once(const JudgmentSet& judgments, Rng& rng) {
  HalfSplit hs;
  hs.p1.reserve(judgments.entries.size());
  hs.p2.reserve(judgments.entries.size());
  for (const auto& e : judgments.entries) {
    long t = e.n_a + e.n_b;
    long h1 = t / 2;
    if (t % 2 != 0 && rng.next_coin()) ++h1;
    long rem_a = e.n_a;
    long rem_t = t;
    long a1 = 0;
    for (long i = 0; i < h1; ++i) {
      if (rng.next_double() * static_cast<double>(rem_t) <
          static_cast<double>(rem_a)) {
        ++a1;
        --rem_a;
      }
      --rem_t;
    }
    long b1 = h1 - a1;
    long h2 = t - h1;
    long b2 = e.n_b - b1;
    hs.p1.push_back(static_cast<double>(b1) / static_cast<double>(h1));
    hs.p2.push_back(static_cast<double>(b2) / static_cast<double>(h2));
  }
  return hs;
}

std::optional<double> pearson(const std::vector<double>& x,
                              const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double dx = x[i] - mx;
    double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

void require_two_trials(const JudgmentSet& judgments) {
  for (const auto& e : judgments.entries) {
    if (e.n_a + e.n_b < 2)
      throw ValidationError("stimulus " + e.id +
                            " has fewer than 2 trials; cannot half-split");
  }
}

}  // namespace

Reliability split_half_reliability(const JudgmentSet& judgments, int n_splits,
                                   std::uint64_t seed, Warnings* warnings) {
  if (n_splits < 1) throw ValidationError("n_splits must be >= 1");
  if (judgments.entries.empty()) throw ValidationError("no judgments");
  require_two_trials(judgments);

  double acc = 0.0;
  for (int s = 0; s < n_splits; ++s) {
    Rng rng(seed, "splits", static_cast<std::uint64_t>(s));
    HalfSplit hs = split_once(judgments, rng);
    auto r = pearson(hs.p1, hs.p2);
    if (!r) {
      warn(warnings, "split " + std::to_string(s) +
                         ": zero variance in half proportions, counted as 0");
    }
    acc += r.value_or(0.0);
  }
  Reliability out;
  out.n_splits = n_splits;
  out.raw_r = acc / static_cast<double>(n_splits);
  out.corrected_r = spearman_brown(out.raw_r);
  return out;
}

double prediction_correlation(
    const std::unordered_map<std::string, double>& predictions_p_b,
    const JudgmentSet& judgments, int n_splits, std::uint64_t seed,
    Warnings* warnings) {
  if (n_splits < 1) throw ValidationError("n_splits must be >= 1");
  if (judgments.entries.empty()) throw ValidationError("no judgments");
  require_two_trials(judgments);
  std::vector<double> preds;
  preds.reserve(judgments.entries.size());
  for (const auto& e : judgments.entries) {
    auto it = predictions_p_b.find(e.id);
    if (it == predictions_p_b.end())
      throw ValidationError("no prediction for judged stimulus " + e.id);
    preds.push_back(it->second);
  }

  bool warned = false;
  double acc = 0.0;
  for (int s = 0; s < n_splits; ++s) {
    Rng rng(seed, "splits", static_cast<std::uint64_t>(s));
    HalfSplit hs = split_once(judgments, rng);
    auto r1 = pearson(preds, hs.p1);
    auto r2 = pearson(preds, hs.p2);
    if (!r1 || !r2) {
      if (!warned) {
        warn(warnings,
             "zero variance in predictions or half proportions; affected "
             "splits counted as 0");
        warned = true;
      }
      acc += 0.0;
    } else {
      acc += 0.5 * (*r1 + *r2);
    }
  }
  return acc / static_cast<double>(n_splits);
}

/*----------------------------------------------------------------------
  Baseline scoring
----------------------------------------------------------------------*/

double BaselinePredictions::p_b_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end())
    throw ValidationError("no baseline prediction for id " + id);
  return entries[it->second].p_b;
}

bool BaselinePredictions::has(const std::string& id) const {
  return index_.count(id) != 0;
}

void BaselinePredictions::rebuild_index() {
  index_.clear();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto [it, fresh] = index_.emplace(entries[i].id, i);
    if (!fresh) throw ValidationError("duplicate baseline id " + entries[i].id);
  }
}

BaselinePredictions load_baseline(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty baseline file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_csv_line(line);
  if (header.size() != 3 || header[0] != "id" || header[1] != "p_A" ||
      header[2] != "p_B")
    throw ValidationError("baseline header must be id,p_A,p_B: " + path);
  BaselinePredictions bp;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != 3)
      throw ValidationError("ragged row at line " + std::to_string(lineno));
    double pa = 0.0, pb = 0.0;
    if (!parse_double(cells[1], &pa) || !parse_double(cells[2], &pb) ||
        !std::isfinite(pa) || !std::isfinite(pb) || pa < 0.0 || pb < 0.0)
      throw ValidationError("bad probabilities at line " + std::to_string(lineno));
    double total = pa + pb;
    if (!(total > 0.0))
      throw ValidationError("probabilities sum to zero at line " +
                            std::to_string(lineno));
    bp.entries.push_back({cells[0], pa / total, pb / total});
  }
  bp.rebuild_index();
  return bp;
}

ModelScore score_baseline(const BaselinePredictions& baseline,
                          const JudgmentSet& judgments, int n_splits,
                          std::uint64_t seed, Warnings* warnings) {
  constexpr double kEps = 1e-6;
  double ll = 0.0;
  std::unordered_map<std::string, double> preds;
  for (const auto& e : judgments.entries) {
    if (!baseline.has(e.id))
      throw ValidationError("no baseline prediction for judged stimulus " + e.id);
    double pb = baseline.p_b_of(e.id);
    double pa = 1.0 - pb;
    if ((pa == 0.0 && e.n_a > 0) || (pb == 0.0 && e.n_b > 0)) {
      warn(warnings, "baseline probability for " + e.id +
                         " is exactly 0/1 against opposing counts; clamped");
      pb = std::min(1.0 - kEps, std::max(kEps, pb));
      pa = 1.0 - pb;
    }
    if (e.n_a > 0) ll += static_cast<double>(e.n_a) * std::log(pa);
    if (e.n_b > 0) ll += static_cast<double>(e.n_b) * std::log(pb);
    preds[e.id] = pb;
  }
  ModelScore score;
  score.name = "nn-softmax";
  score.group = "Baseline";
  score.k = 1;
  score.ll = ll;
  score.aic = aic(score.k, ll);
  score.correlation =
      prediction_correlation(preds, judgments, n_splits, seed, warnings);
  return score;
}

/*----------------------------------------------------------------------
  Comparison report
----------------------------------------------------------------------*/

CompareReport compare_models(const std::vector<ModelScore>& scores,
                             const Reliability* ceiling) {
  if (scores.empty() && !ceiling) throw ValidationError("nothing to compare");
  CompareReport report;
  // Canonical section order first, then any extra groups as encountered.
  std::vector<std::string> order = {"Prototype - Linear", "Prototype - Quadratic",
                                    "Exemplar", "Baseline"};
  for (const auto& s : scores) {
    if (std::find(order.begin(), order.end(), s.group) == order.end())
      order.push_back(s.group);
  }
  for (const auto& name : order) {
    CompareReport::Group group;
    group.name = name;
    for (const auto& s : scores) {
      if (s.group == name) group.rows.push_back({s, false});
    }
    if (group.rows.empty()) continue;
    std::sort(group.rows.begin(), group.rows.end(),
              [](const CompareReport::Row& a, const CompareReport::Row& b) {
                if (a.score.ll != b.score.ll) return a.score.ll > b.score.ll;
                if (a.score.aic != b.score.aic) return a.score.aic < b.score.aic;
                return a.score.name < b.score.name;
              });
    group.rows.front().best_in_class = true;
    report.groups.push_back(std::move(group));
  }
  if (ceiling) {
    report.has_ceiling = true;
    report.ceiling_corrected_r = ceiling->corrected_r;
  }
  return report;
}

std::string CompareReport::render_text() const {
  char buf[160];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-28s %16s %16s %13s %7s\n", "Model", "LL",
                "AIC", "Correlation", "k");
  out += buf;
  out += std::string(83, '-') + "\n";
  for (const auto& group : groups) {
    out += group.name + "\n";
    for (const auto& row : group.rows) {
      std::snprintf(buf, sizeof(buf), "%c %-26s %16.4f %16.4f %13.4f %7d\n",
                    row.best_in_class ? '*' : ' ', row.score.name.c_str(),
                    row.score.ll, row.score.aic, row.score.correlation,
                    row.score.k);
      out += buf;
    }
  }
  if (has_ceiling) {
    out += "Ceiling\n";
    std::snprintf(buf, sizeof(buf), "  %-26s %16s %16s %13.4f %7s\n",
                  "split-half reliability", "-", "-", ceiling_corrected_r, "-");
    out += buf;
  }
  return out;
}

nlohmann::json CompareReport::to_json() const {
  nlohmann::json j;
  nlohmann::json groups_j = nlohmann::json::array();
  for (const auto& group : groups) {
    nlohmann::json gj;
    gj["name"] = group.name;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : group.rows) {
      rows.push_back({{"model", row.score.name},
                      {"ll", row.score.ll},
                      {"aic", row.score.aic},
                      {"correlation", row.score.correlation},
                      {"k", row.score.k},
                      {"best_in_class", row.best_in_class}});
    }
    gj["rows"] = rows;
    groups_j.push_back(gj);
  }
  j["groups"] = groups_j;
  if (has_ceiling) {
    j["ceiling"] = {{"corrected_split_half_r", ceiling_corrected_r}};
  }
  return j;
}

}  // namespace catfit
