#include "rankweave/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "rankweave/detail/text.hpp"
#include "rankweave/error.hpp"

namespace rankweave {
namespace {

using detail::chomp;
using detail::format_double;
using detail::parse_double;
using detail::parse_int64;
using detail::split;

// Splits file contents into lines, dropping one trailing empty line.
std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines = split(text, '\n');
  while (!lines.empty() && chomp(lines.back()).empty()) lines.pop_back();
  for (auto& line : lines) line = chomp(line);
  return lines;
}

struct FieldError {
  const std::string& source;
  std::size_t line;

  [[noreturn]] void operator()(std::string_view field, const std::string& what) const {
    throw ParseError(source, line, "field '" + std::string(field) + "': " + what);
  }
};

double parse_unit_interval(std::string_view text, std::string_view field,
                           const FieldError& fail) {
  double v = 0.0;
  if (!parse_double(text, &v)) fail(field, "not a number: '" + std::string(text) + "'");
  if (!(v >= 0.0 && v <= 1.0)) fail(field, "value " + std::string(text) + " outside [0,1]");
  return v;
}

std::string format_optional(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("NA");
}

}  // namespace

std::size_t Dataset::document_count() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.documents.size();
  return n;
}

std::string normalize_domain(std::string_view raw) {
  std::string_view s = raw;
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (const auto pos = s.find("://"); pos != std::string_view::npos) s.remove_prefix(pos + 3);
  if (const auto pos = s.find_first_of("/?#"); pos != std::string_view::npos) s = s.substr(0, pos);
  if (const auto pos = s.rfind('@'); pos != std::string_view::npos) s.remove_prefix(pos + 1);
  if (const auto pos = s.rfind(':'); pos != std::string_view::npos) {
    const auto port = s.substr(pos + 1);
    if (std::all_of(port.begin(), port.end(),
                    [](unsigned char c) { return std::isdigit(c) != 0; })) {
      s = s.substr(0, pos);
    }
  }
  while (!s.empty() && s.back() == '.') s.remove_suffix(1);
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

Dataset parse_documents_text(std::string_view text, const std::string& source,
                             const DocumentSchema& schema) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw ParseError(source, 1, "missing header row");

  const auto header = split(lines[0], '\t');
  const std::array<const std::string*, 7> named = {&schema.query_id, &schema.doc_id,
                                                   &schema.domain,   &schema.ir,
                                                   &schema.ia,       &schema.wm,
                                                   &schema.wm_prob};
  std::array<std::size_t, 7> column{};
  std::vector<bool> is_named(header.size(), false);
  for (std::size_t k = 0; k < named.size(); ++k) {
    auto it = std::find(header.begin(), header.end(), *named[k]);
    if (it == header.end()) throw ParseError(source, 1, "missing column '" + *named[k] + "'");
    column[k] = static_cast<std::size_t>(it - header.begin());
    is_named[column[k]] = true;
  }

  Dataset dataset;
  std::vector<std::size_t> feature_columns;
  std::unordered_set<std::string_view> seen_names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c].empty()) throw ParseError(source, 1, "empty column name");
    if (!seen_names.insert(header[c]).second) {
      throw ParseError(source, 1, "duplicate column '" + std::string(header[c]) + "'");
    }
    if (is_named[c]) continue;
    feature_columns.push_back(c);
    dataset.feature_names.emplace_back(header[c]);
  }

  std::unordered_map<std::string, std::size_t> group_of;
  std::vector<std::unordered_set<std::string>> ids_in_group;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const FieldError fail{source, line_no};
    const auto fields = split(lines[i], '\t');
    if (fields.size() != header.size()) {
      throw ParseError(source, line_no,
                       "expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()));
    }
    const auto field = [&](std::size_t k) { return fields[column[k]]; };

    Document doc;
    doc.query_id = std::string(field(0));
    doc.doc_id = std::string(field(1));
    if (doc.query_id.empty()) fail(schema.query_id, "empty");
    if (doc.doc_id.empty()) fail(schema.doc_id, "empty");
    doc.domain = normalize_domain(field(2));

    std::int64_t ir = 0;
    if (!parse_int64(field(3), &ir)) {
      fail(schema.ir, "not an integer: '" + std::string(field(3)) + "'");
    }
    if (ir < kBad || ir > kExcellent) {
      fail(schema.ir, "value " + std::to_string(ir) + " outside {0,1,2}");
    }
    doc.ir_label = static_cast<int>(ir);

    if (field(4) != schema.missing) doc.ia_label = parse_unit_interval(field(4), schema.ia, fail);
    if (field(5) != schema.missing) {
      std::int64_t wm = 0;
      if (!parse_int64(field(5), &wm) || (wm != 0 && wm != 1)) {
        fail(schema.wm, "expected 0, 1 or " + schema.missing + ", found '" +
                            std::string(field(5)) + "'");
      }
      doc.wm_label = static_cast<int>(wm);
    }
    if (field(6) != schema.missing) {
      doc.wm_prob = parse_unit_interval(field(6), schema.wm_prob, fail);
    }

    doc.features.reserve(feature_columns.size());
    for (std::size_t c : feature_columns) {
      double v = 0.0;
      if (!parse_double(fields[c], &v) || !std::isfinite(v)) {
        fail(header[c], "not a finite number: '" + std::string(fields[c]) + "'");
      }
      doc.features.push_back(v);
    }

    auto [it, inserted] = group_of.try_emplace(doc.query_id, dataset.groups.size());
    if (inserted) {
      dataset.groups.push_back(QueryGroup{doc.query_id, {}});
      ids_in_group.emplace_back();
    }
    if (!ids_in_group[it->second].insert(doc.doc_id).second) {
      fail(schema.doc_id, "duplicate doc_id '" + doc.doc_id + "' in query '" + doc.query_id + "'");
    }
    dataset.groups[it->second].documents.push_back(std::move(doc));
  }
  return dataset;
}

Dataset parse_documents(const std::string& path, const DocumentSchema& schema) {
  return parse_documents_text(detail::read_file(path), path, schema);
}

std::string serialize_documents(const Dataset& dataset) {
  std::string out = "query_id\tdoc_id\tdomain\tir\tia\twm\twm_prob";
  for (const auto& name : dataset.feature_names) out += "\t" + name;
  out += '\n';
  for (const auto& group : dataset.groups) {
    for (const auto& d : group.documents) {
      out += d.query_id;
      out += '\t' + d.doc_id;
      out += '\t' + d.domain;
      out += '\t' + std::to_string(d.ir_label);
      out += '\t' + format_optional(d.ia_label);
      out += '\t' + (d.wm_label ? std::to_string(*d.wm_label) : std::string("NA"));
      out += '\t' + format_optional(d.wm_prob);
      for (double f : d.features) out += '\t' + format_double(f);
      out += '\n';
    }
  }
  return out;
}

void write_documents(const std::string& path, const Dataset& dataset) {
  detail::write_file(path, serialize_documents(dataset));
}

void validate_dataset(const Dataset& dataset) {
  const std::size_t dim = dataset.feature_dim();
  std::unordered_set<std::string_view> queries;
  for (const auto& group : dataset.groups) {
    if (group.documents.empty()) {
      throw ValidationError("query '" + group.query_id + "' has no documents");
    }
    if (!queries.insert(group.query_id).second) {
      throw ValidationError("query '" + group.query_id + "' appears in two groups");
    }
    std::unordered_set<std::string_view> ids;
    for (const auto& d : group.documents) {
      const std::string where = "document '" + d.doc_id + "' of query '" + group.query_id + "'";
      if (d.query_id != group.query_id) throw ValidationError(where + ": query_id mismatch");
      if (!ids.insert(d.doc_id).second) throw ValidationError(where + ": duplicate doc_id");
      if (d.features.size() != dim) {
        throw ValidationError(where + ": feature dimension " + std::to_string(d.features.size()) +
                              " != " + std::to_string(dim));
      }
      if (d.ir_label < kBad || d.ir_label > kExcellent) {
        throw ValidationError(where + ": ir label outside {0,1,2}");
      }
      if (d.ia_label && !(*d.ia_label >= 0.0 && *d.ia_label <= 1.0)) {
        throw ValidationError(where + ": ia label outside [0,1]");
      }
      if (d.wm_label && *d.wm_label != 0 && *d.wm_label != 1) {
        throw ValidationError(where + ": wm label not binary");
      }
      if (d.wm_prob && !(*d.wm_prob >= 0.0 && *d.wm_prob <= 1.0)) {
        throw ValidationError(where + ": wm_prob outside [0,1]");
      }
    }
  }
}

Dataset select_features(const Dataset& dataset, std::span<const std::string> names) {
  constexpr std::size_t kWmProb = static_cast<std::size_t>(-1);
  std::vector<std::size_t> source;
  for (const auto& name : names) {
    auto it = std::find(dataset.feature_names.begin(), dataset.feature_names.end(), name);
    if (it != dataset.feature_names.end()) {
      source.push_back(static_cast<std::size_t>(it - dataset.feature_names.begin()));
    } else if (name == "wm_prob") {
      source.push_back(kWmProb);
    } else {
      throw ValidationError("unknown feature column '" + name + "'");
    }
  }
  Dataset out;
  out.feature_names.assign(names.begin(), names.end());
  out.groups.reserve(dataset.groups.size());
  for (const auto& group : dataset.groups) {
    QueryGroup g{group.query_id, {}};
    g.documents.reserve(group.documents.size());
    for (const auto& d : group.documents) {
      Document copy = d;
      copy.features.clear();
      for (std::size_t s : source) {
        if (s != kWmProb) {
          copy.features.push_back(d.features[s]);
        } else if (d.wm_prob) {
          copy.features.push_back(*d.wm_prob);
        } else {
          throw ValidationError("document '" + d.doc_id + "' of query '" + d.query_id +
                                "' has no wm_prob but it is selected as a feature");
        }
      }
      g.documents.push_back(std::move(copy));
    }
    out.groups.push_back(std::move(g));
  }
  return out;
}

double compute_ia_score(const JudgeCounts& c) {
  if (c.n_judgments <= 0) throw ValidationError("compute_ia_score: n_judgments must be positive");
  if (c.n_win < 0 || c.n_equal < 0 || c.n_win + c.n_equal > c.n_judgments) {
    throw ValidationError("compute_ia_score: need 0 <= n_win, n_equal and n_win + n_equal <= n_judgments");
  }
  return (static_cast<double>(c.n_win) + 0.5 * static_cast<double>(c.n_equal)) /
         static_cast<double>(c.n_judgments);
}

std::array<std::size_t, 5> select_reference_images(std::span<const double> scores) {
  const std::size_t n = scores.size();
  if (n < 5) throw ValidationError("select_reference_images: need at least 5 scores");
  if (std::any_of(scores.begin(), scores.end(), [](double s) { return std::isnan(s); })) {
    throw ValidationError("select_reference_images: NaN score");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::array<std::size_t, 5> picked{};
  // Percentile q/4 for q = 4..0.
  for (std::size_t slot = 0; slot < 5; ++slot) {
    const std::size_t q = 4 - slot;
    const std::size_t from_bottom = (q * (n - 1) + 3) / 4;
    picked[slot] = order[(n - 1) - from_bottom];
  }
  return picked;
}

// ---------------------------------------------------------------------------

std::int64_t JudgedPair::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

std::vector<JudgedPair> parse_pairs_text(std::string_view text, const Dataset& documents,
                                         const std::string& source) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw ParseError(source, 1, "missing header row");
  static const std::vector<std::string_view> kHeader = {
      "query_id", "left_doc_id", "right_doc_id", "c0", "c1", "c2", "c3", "c4"};
  if (split(lines[0], '\t') != kHeader) {
    throw ParseError(source, 1,
                     "header must be query_id, left_doc_id, right_doc_id, c0..c4 (tab-separated)");
  }

  std::unordered_map<std::string_view, std::size_t> group_of;
  std::vector<std::unordered_map<std::string_view, std::size_t>> index_in_group(
      documents.groups.size());
  std::unordered_map<std::string_view, std::string_view> any_query_of;
  for (std::size_t g = 0; g < documents.groups.size(); ++g) {
    const auto& group = documents.groups[g];
    group_of.emplace(group.query_id, g);
    for (std::size_t i = 0; i < group.documents.size(); ++i) {
      index_in_group[g].emplace(group.documents[i].doc_id, i);
      any_query_of.emplace(group.documents[i].doc_id, group.query_id);
    }
  }

  std::vector<JudgedPair> pairs;
  pairs.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto fields = split(lines[i], '\t');
    if (fields.size() != kHeader.size()) {
      throw ParseError(source, line_no,
                       "expected 8 fields, found " + std::to_string(fields.size()));
    }
    JudgedPair pair;
    pair.query_id = std::string(fields[0]);
    pair.left_doc_id = std::string(fields[1]);
    pair.right_doc_id = std::string(fields[2]);

    auto g = group_of.find(fields[0]);
    if (g == group_of.end()) {
      throw ParseError(source, line_no, "unknown query_id '" + pair.query_id + "'");
    }
    const auto resolve = [&](std::string_view id) {
      auto it = index_in_group[g->second].find(id);
      if (it != index_in_group[g->second].end()) return DocRef{g->second, it->second};
      auto other = any_query_of.find(id);
      if (other != any_query_of.end()) {
        throw ParseError(source, line_no,
                         "cross-query pair: doc_id '" + std::string(id) + "' belongs to query '" +
                             std::string(other->second) + "', not '" + pair.query_id + "'");
      }
      throw ParseError(source, line_no, "dangling doc_id '" + std::string(id) + "'");
    };
    pair.left = resolve(fields[1]);
    pair.right = resolve(fields[2]);
    if (pair.left == pair.right) {
      throw ParseError(source, line_no, "left and right are the same document");
    }

    for (std::size_t k = 0; k < kVerdictCount; ++k) {
      if (!parse_int64(fields[3 + k], &pair.counts[k]) || pair.counts[k] < 0) {
        throw ParseError(source, line_no,
                         "field 'c" + std::to_string(k) + "': expected a non-negative integer");
      }
    }
    if (pair.total() < 1) throw ParseError(source, line_no, "pair has zero verdicts");
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::vector<JudgedPair> parse_pairs(const std::string& path, const Dataset& documents) {
  return parse_pairs_text(detail::read_file(path), documents, path);
}

std::string serialize_pairs(std::span<const JudgedPair> pairs) {
  std::string out = "query_id\tleft_doc_id\tright_doc_id\tc0\tc1\tc2\tc3\tc4\n";
  for (const auto& p : pairs) {
    out += p.query_id + '\t' + p.left_doc_id + '\t' + p.right_doc_id;
    for (auto c : p.counts) out += '\t' + std::to_string(c);
    out += '\n';
  }
  return out;
}

void write_pairs(const std::string& path, std::span<const JudgedPair> pairs) {
  detail::write_file(path, serialize_pairs(pairs));
}

}  // namespace rankweave
