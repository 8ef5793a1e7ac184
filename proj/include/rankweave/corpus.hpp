#ifndef RANKWEAVE_CORPUS_HPP_
#define RANKWEAVE_CORPUS_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rankweave {

// Relevance grades.
inline constexpr int kBad = 0;
inline constexpr int kGood = 1;
inline constexpr int kExcellent = 2;

/// One judged (query, image) unit.
struct Document {
  std::string query_id;
  std::string doc_id;
  std::string domain;  // lowercased host, may be empty
  int ir_label = kBad;
  std::optional<double> ia_label;  // judged attractiveness in [0,1]
  std::optional<int> wm_label;     // visible watermark ground truth
  std::optional<double> wm_prob;   // content classifier probability
  std::vector<double> features;

  bool operator==(const Document&) const = default;
};

struct QueryGroup {
  std::string query_id;
  std::vector<Document> documents;

  bool operator==(const QueryGroup&) const = default;
};

/// Position of a document inside a Dataset.
struct DocRef {
  std::size_t group = 0;
  std::size_t index = 0;

  bool operator==(const DocRef&) const = default;
};

/// Documents grouped per query, in order of first appearance.
struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<QueryGroup> groups;

  std::size_t feature_dim() const { return feature_names.size(); }
  std::size_t document_count() const;
  const Document& at(DocRef ref) const { return groups.at(ref.group).documents.at(ref.index); }

  bool operator==(const Dataset&) const = default;
};

/// Column names for the logical document fields. Every other header column
/// is a feature, kept in file order.
struct DocumentSchema {
  std::string query_id = "query_id";
  std::string doc_id = "doc_id";
  std::string domain = "domain";
  std::string ir = "ir";
  std::string ia = "ia";
  std::string wm = "wm";
  std::string wm_prob = "wm_prob";
  std::string missing = "NA";
};

/// Parses a documents TSV file. Throws ParseError naming the offending line.
Dataset parse_documents(const std::string& path, const DocumentSchema& schema = {});
Dataset parse_documents_text(std::string_view text, const std::string& source = "<memory>",
                             const DocumentSchema& schema = {});

/// Canonical TSV form: fixed leading columns, then features, shortest
/// round-trip number formatting, LF line endings.
std::string serialize_documents(const Dataset& dataset);
void write_documents(const std::string& path, const Dataset& dataset);

/// Checks every Document/QueryGroup invariant. Throws ValidationError.
void validate_dataset(const Dataset& dataset);

/// Copy of `dataset` whose feature vectors hold only the named columns, in
/// the given order. The name "wm_prob" selects the watermark probability
/// column, which must then be present on every document.
Dataset select_features(const Dataset& dataset, std::span<const std::string> names);

/// Lowercased bare host: scheme, credentials, port and path removed.
std::string normalize_domain(std::string_view raw);

// ---------------------------------------------------------------------------
// Attractiveness labels.

struct JudgeCounts {
  std::int64_t n_win = 0;
  std::int64_t n_equal = 0;
  std::int64_t n_judgments = 0;
};

/// (n_win + 0.5 n_equal) / n_judgments.
double compute_ia_score(const JudgeCounts& counts);

/// Picks the reference images at ranking percentiles 100/75/50/25/0 %.
/// Scores are sorted descending with ties broken by index; the image at
/// percentile p sits ceil(p (n-1)) places above the bottom of that order.
/// Returned best-to-worst.
std::array<std::size_t, 5> select_reference_images(std::span<const double> scores);

// ---------------------------------------------------------------------------
// Side-by-side judgments.

inline constexpr std::size_t kVerdictCount = 5;

enum class Verdict : std::size_t {
  kLeftBetter = 0,
  kLeftSlightlyBetter = 1,
  kEqual = 2,
  kRightSlightlyBetter = 3,
  kRightBetter = 4,
};

using VerdictCounts = std::array<std::int64_t, kVerdictCount>;

struct JudgedPair {
  std::string query_id;
  std::string left_doc_id;
  std::string right_doc_id;
  DocRef left;
  DocRef right;
  VerdictCounts counts{};

  std::int64_t total() const;
  bool operator==(const JudgedPair&) const = default;
};

/// Parses a pairs TSV file, resolving doc ids against `documents`.
std::vector<JudgedPair> parse_pairs(const std::string& path, const Dataset& documents);
std::vector<JudgedPair> parse_pairs_text(std::string_view text, const Dataset& documents,
                                         const std::string& source = "<memory>");

std::string serialize_pairs(std::span<const JudgedPair> pairs);
void write_pairs(const std::string& path, std::span<const JudgedPair> pairs);

}  // namespace rankweave

#endif  // RANKWEAVE_CORPUS_HPP_
