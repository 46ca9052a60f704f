#include "catfit/data.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace catfit {

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.eof()) break;
    lines.push_back(line);
  }
  return lines;
}

std::string pair_key(const std::string& a, const std::string& b) {
  if (a <= b) return a + '\x1f' + b;
  return b + '\x1f' + a;
}

Category parse_label(const std::string& tok, const LabelMap& lm,
                     const std::string& where) {
  if (tok == lm.a) return Category::A;
  if (tok == lm.b) return Category::B;
  throw ValidationError("unknown label token '" + tok + "' at " + where +
                        " (expected '" + lm.a + "' or '" + lm.b + "')");
}

}  // namespace

Index FeatureMatrix::row_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ValidationError("unknown stimulus id: " + id);
  return it->second;
}

IndexList FeatureMatrix::rows_of_category(Category c) const {
  IndexList out;
  for (Index i = 0; i < n_stimuli(); ++i) {
    if (labels[static_cast<std::size_t>(i)] == c) out.push_back(i);
  }
  return out;
}

IndexList FeatureMatrix::rows_of_category(Category c, const IndexList& subset) const {
  IndexList out;
  for (Index i : subset) {
    if (labels[static_cast<std::size_t>(i)] == c) out.push_back(i);
  }
  return out;
}

IndexList FeatureMatrix::all_rows() const {
  IndexList out(static_cast<std::size_t>(n_stimuli()));
  for (Index i = 0; i < n_stimuli(); ++i) out[static_cast<std::size_t>(i)] = i;
  return out;
}

void FeatureMatrix::rebuild_index() {
  if (values.rows() < 2) throw ValidationError("need at least 2 stimuli");
  if (values.cols() < 1) throw ValidationError("need at least 1 feature");
  if (ids.size() != static_cast<std::size_t>(values.rows()) ||
      labels.size() != ids.size()) {
    throw ValidationError("ids/labels/values size mismatch");
  }
  if (!values.allFinite()) throw ValidationError("non-finite feature");
  index_.clear();
  index_.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto [it, fresh] = index_.emplace(ids[i], static_cast<Index>(i));
    if (!fresh) throw ValidationError("duplicate id: " + ids[i]);
  }
}

const JudgmentSet::Entry& JudgmentSet::at(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ValidationError("no judgments for id: " + id);
  return entries[it->second];
}

long JudgmentSet::total_trials() const {
  long t = 0;
  for (const auto& e : entries) t += e.n_a + e.n_b;
  return t;
}

void JudgmentSet::rebuild_index() {
  index_.clear();
  index_.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.n_a < 0 || e.n_b < 0)
      throw ValidationError("negative count for id: " + e.id);
    if (e.n_a + e.n_b < 1)
      throw ValidationError("empty stimulus (no trials) for id: " + e.id);
    auto [it, fresh] = index_.emplace(e.id, i);
    if (!fresh) throw ValidationError("duplicate judgment id: " + e.id);
  }
}

void JudgmentSet::validate_against(const FeatureMatrix& features) const {
  for (const auto& e : entries) {
    if (!features.has(e.id))
      throw ValidationError("judged id not in features: " + e.id);
  }
}

AlignedCounts align_judgments(const FeatureMatrix& features,
                              const JudgmentSet& judgments) {
  judgments.validate_against(features);
  AlignedCounts out;
  out.n_a = Vector::Zero(features.n_stimuli());
  out.n_b = Vector::Zero(features.n_stimuli());
  for (const auto& e : judgments.entries) {
    Index row = features.row_of(e.id);
    out.n_a[row] = static_cast<double>(e.n_a);
    out.n_b[row] = static_cast<double>(e.n_b);
  }
  for (Index i = 0; i < features.n_stimuli(); ++i) {
    if (out.n_a[i] + out.n_b[i] >= 1.0) out.judged_rows.push_back(i);
  }
  return out;
}

bool SimilarityRatings::has(const std::string& a, const std::string& b) const {
  return index_.count(pair_key(a, b)) != 0;
}

double SimilarityRatings::lookup(const std::string& a, const std::string& b) const {
  auto it = index_.find(pair_key(a, b));
  if (it == index_.end())
    throw ValidationError("no rating for pair (" + a + ", " + b + ")");
  return it->second;
}

void SimilarityRatings::validate_against(const FeatureMatrix& features) const {
  for (const auto& p : pairs) {
    if (!features.has(p.id_a))
      throw ValidationError("rated id not in features: " + p.id_a);
    if (!features.has(p.id_b))
      throw ValidationError("rated id not in features: " + p.id_b);
  }
}

void SimilarityRatings::rebuild_index() {
  index_.clear();
  index_.reserve(pairs.size());
  for (const auto& p : pairs) {
    index_.emplace(pair_key(p.id_a, p.id_b), p.rating);
  }
}

/*----------------------------------------------------------------------
  CSV ingestion
----------------------------------------------------------------------*/

FeatureMatrix load_features(const std::string& path, const LabelMap& lm) {
  auto lines = read_lines(path);
  if (lines.empty()) throw ValidationError("empty features file: " + path);
  auto header = split_csv_line(lines[0]);
  if (header.size() < 3 || header[0] != "id" || header[1] != "label") {
    throw ValidationError("features header must be id,label,f0..: " + path);
  }
  const std::size_t n_cols = header.size();
  const Index n_feat = static_cast<Index>(n_cols - 2);
  const Index n_rows = static_cast<Index>(lines.size() - 1);

  FeatureMatrix fm;
  fm.values.resize(n_rows, n_feat);
  fm.ids.reserve(static_cast<std::size_t>(n_rows));
  fm.labels.reserve(static_cast<std::size_t>(n_rows));
  for (Index r = 0; r < n_rows; ++r) {
    const std::string& line = lines[static_cast<std::size_t>(r + 1)];
    auto cells = split_csv_line(line);
    if (cells.size() != n_cols) {
      throw ValidationError("ragged row (got " + std::to_string(cells.size()) +
                            " cells, expected " + std::to_string(n_cols) +
                            ") at line " + std::to_string(r + 2) + " of " + path);
    }
    fm.ids.push_back(cells[0]);
    fm.labels.push_back(
        parse_label(cells[1], lm, path + ":" + std::to_string(r + 2)));
    for (Index c = 0; c < n_feat; ++c) {
      double v = 0.0;
      if (!parse_double(cells[static_cast<std::size_t>(c + 2)], &v)) {
        throw ValidationError("bad numeric cell '" +
                              cells[static_cast<std::size_t>(c + 2)] +
                              "' at line " + std::to_string(r + 2));
      }
      if (!std::isfinite(v)) {
        throw ValidationError("non-finite feature at line " +
                              std::to_string(r + 2) + " of " + path);
      }
      fm.values(r, c) = v;
    }
  }
  fm.rebuild_index();
  return fm;
}

JudgmentSet load_judgments(const std::string& path, JudgmentMode mode,
                           const LabelMap& lm) {
  auto lines = read_lines(path);
  if (lines.empty()) throw ValidationError("empty judgments file: " + path);
  JudgmentSet js;
  auto header = split_csv_line(lines[0]);
  if (mode == JudgmentMode::Trials) {
    if (header.size() != 2 || header[0] != "id" || header[1] != "choice")
      throw ValidationError("trials header must be id,choice: " + path);
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      auto cells = split_csv_line(lines[i]);
      if (cells.size() != 2)
        throw ValidationError("ragged row at line " + std::to_string(i + 1));
      Category c = parse_label(cells[1], lm, path + ":" + std::to_string(i + 1));
      auto it = seen.find(cells[0]);
      if (it == seen.end()) {
        seen.emplace(cells[0], js.entries.size());
        js.entries.push_back({cells[0], 0, 0});
        it = seen.find(cells[0]);
      }
      auto& e = js.entries[it->second];
      if (c == Category::A)
        ++e.n_a;
      else
        ++e.n_b;
    }
  } else {
    if (header.size() != 3 || header[0] != "id" || header[1] != "n_A" ||
        header[2] != "n_B")
      throw ValidationError("counts header must be id,n_A,n_B: " + path);
    for (std::size_t i = 1; i < lines.size(); ++i) {
      auto cells = split_csv_line(lines[i]);
      if (cells.size() != 3)
        throw ValidationError("ragged row at line " + std::to_string(i + 1));
      long na = 0, nb = 0;
      if (!parse_long(cells[1], &na) || !parse_long(cells[2], &nb))
        throw ValidationError("bad count at line " + std::to_string(i + 1) +
                              " of " + path);
      js.entries.push_back({cells[0], na, nb});
    }
  }
  js.rebuild_index();
  return js;
}

SimilarityRatings load_similarities(const std::string& path, Warnings* warnings) {
  auto lines = read_lines(path);
  if (lines.empty()) throw ValidationError("empty similarities file: " + path);
  auto header = split_csv_line(lines[0]);
  if (header.size() != 3 || header[0] != "id_a" || header[1] != "id_b" ||
      header[2] != "rating")
    throw ValidationError("similarities header must be id_a,id_b,rating: " + path);

  SimilarityRatings sr;
  std::unordered_map<std::string, double> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto cells = split_csv_line(lines[i]);
    if (cells.size() != 3)
      throw ValidationError("ragged row at line " + std::to_string(i + 1));
    double rating = 0.0;
    if (!parse_double(cells[2], &rating) || !std::isfinite(rating))
      throw ValidationError("bad rating at line " + std::to_string(i + 1));
    // Scale is 0-10 by instruction, not enforced.
    if (rating < 0.0 || rating > 10.0) {
      warn(warnings, "rating " + format_double(rating) + " for (" + cells[0] +
                         ", " + cells[1] + ") is outside the 0-10 scale");
    }
    std::string key = pair_key(cells[0], cells[1]);
    auto it = seen.find(key);
    if (it != seen.end()) {
      if (it->second != rating) {
        throw ValidationError("conflicting duplicate pair (" + cells[0] + ", " +
                              cells[1] + ")");
      }
      continue;  // identical duplicate, idempotent
    }
    seen.emplace(key, rating);
    sr.pairs.push_back({cells[0], cells[1], rating});
  }
  sr.rebuild_index();
  return sr;
}

/*----------------------------------------------------------------------
  Writers (bit-exact round trip with the loaders)
----------------------------------------------------------------------*/

void write_features(const std::string& path, const FeatureMatrix& fm,
                    const LabelMap& lm) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << "id,label";
  for (Index c = 0; c < fm.n_features(); ++c) out << ",f" << c;
  out << '\n';
  for (Index r = 0; r < fm.n_stimuli(); ++r) {
    out << fm.ids[static_cast<std::size_t>(r)] << ','
        << (fm.labels[static_cast<std::size_t>(r)] == Category::A ? lm.a : lm.b);
    for (Index c = 0; c < fm.n_features(); ++c)
      out << ',' << format_double(fm.values(r, c));
    out << '\n';
  }
}

void write_judgments(const std::string& path, const JudgmentSet& js) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << "id,n_A,n_B\n";
  for (const auto& e : js.entries)
    out << e.id << ',' << e.n_a << ',' << e.n_b << '\n';
}

}  // namespace catfit
