#ifndef RANKWEAVE_WATERMARK_SIGNAL_HPP_
#define RANKWEAVE_WATERMARK_SIGNAL_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "rankweave/corpus.hpp"

namespace rankweave {

struct DomainStats {
  std::int64_t n_images = 0;
  std::int64_t n_watermarked = 0;

  double rate() const {
    return n_images > 0 ? static_cast<double>(n_watermarked) / static_cast<double>(n_images) : 0.0;
  }
  bool operator==(const DomainStats&) const = default;
};

/// Domains known to host watermarked images, with the statistics that
/// qualified each one.
struct DomainList {
  std::int64_t min_count = 5;
  double min_rate = 0.90;
  std::map<std::string, DomainStats> entries;  // sorted by domain

  bool contains(std::string_view domain) const {
    return entries.find(std::string(domain)) != entries.end();
  }
  std::size_t size() const { return entries.size(); }
  bool operator==(const DomainList&) const = default;
};

struct DomainListBuild {
  DomainList list;
  std::size_t domains_seen = 0;      // distinct non-empty domains with labeled images
  std::size_t skipped_unlabeled = 0; // documents without wm_label
  std::size_t skipped_no_domain = 0; // labeled documents with an empty domain
};

/// Keeps domains with strictly more than `min_count` labeled images and a
/// watermark rate strictly above `min_rate`.
DomainListBuild build_domain_list(const Dataset& documents, std::int64_t min_count = 5,
                                  double min_rate = 0.90);

/// Watermark probability fed to the ranker: 1 for listed domains, otherwise
/// the content probability, otherwise the 0.5 neutral prior.
double fuse_probability(std::string_view domain, std::optional<double> content_prob,
                        const DomainList& list);

/// Rewrites every document's wm_prob with fuse_probability. With
/// `domain_only`, content probabilities are ignored.
Dataset fuse_dataset(const Dataset& documents, const DomainList& list, bool domain_only = false);

std::string serialize_domain_list(const DomainList& list);
DomainList parse_domain_list_text(std::string_view text, const std::string& source = "<memory>");
void save_domain_list(const DomainList& list, const std::string& path);
DomainList load_domain_list(const std::string& path);

}  // namespace rankweave

#endif  // RANKWEAVE_WATERMARK_SIGNAL_HPP_
