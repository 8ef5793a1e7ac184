#include "rankweave/watermark_signal.hpp"

#include <cmath>

#include "rankweave/detail/text.hpp"
#include "rankweave/error.hpp"

namespace rankweave {
namespace {

constexpr std::string_view kMagic = "rankweave-domains v1";

void check_thresholds(std::int64_t min_count, double min_rate) {
  if (min_count < 0) throw ValidationError("domain list: min_count must be non-negative");
  if (!(min_rate >= 0.0 && min_rate <= 1.0)) {
    throw ValidationError("domain list: min_rate must lie in [0,1]");
  }
}

bool qualifies(const DomainStats& s, std::int64_t min_count, double min_rate) {
  return s.n_images > min_count && s.rate() > min_rate;
}

}  // namespace

DomainListBuild build_domain_list(const Dataset& documents, std::int64_t min_count,
                                  double min_rate) {
  check_thresholds(min_count, min_rate);
  if (documents.document_count() == 0) throw ValidationError("build_domain_list: empty input");

  DomainListBuild result;
  result.list.min_count = min_count;
  result.list.min_rate = min_rate;
  std::map<std::string, DomainStats> counts;
  for (const auto& group : documents.groups) {
    for (const auto& d : group.documents) {
      if (!d.wm_label) {
        ++result.skipped_unlabeled;
        continue;
      }
      if (d.domain.empty()) {
        ++result.skipped_no_domain;
        continue;
      }
      auto& s = counts[d.domain];
      ++s.n_images;
      s.n_watermarked += *d.wm_label;
    }
  }
  result.domains_seen = counts.size();
  for (auto& [domain, stats] : counts) {
    if (qualifies(stats, min_count, min_rate)) result.list.entries.emplace(domain, stats);
  }
  return result;
}

double fuse_probability(std::string_view domain, std::optional<double> content_prob,
                        const DomainList& list) {
  if (content_prob && !(*content_prob >= 0.0 && *content_prob <= 1.0)) {
    throw ValidationError("fuse_probability: content probability outside [0,1]");
  }
  if (!domain.empty() && list.contains(domain)) return 1.0;
  return content_prob.value_or(0.5);
}

Dataset fuse_dataset(const Dataset& documents, const DomainList& list, bool domain_only) {
  Dataset out = documents;
  for (auto& group : out.groups) {
    for (auto& d : group.documents) {
      d.wm_prob = fuse_probability(d.domain, domain_only ? std::nullopt : d.wm_prob, list);
    }
  }
  return out;
}

std::string serialize_domain_list(const DomainList& list) {
  std::string out(kMagic);
  out += "\tmin_count=" + std::to_string(list.min_count);
  out += "\tmin_rate=" + detail::format_double(list.min_rate) + "\n";
  for (const auto& [domain, s] : list.entries) {
    out += domain + '\t' + std::to_string(s.n_images) + '\t' + std::to_string(s.n_watermarked) +
           '\n';
  }
  return out;
}

DomainList parse_domain_list_text(std::string_view text, const std::string& source) {
  const auto lines = detail::split(text, '\n');
  // A complete file always ends with a newline, so the final piece is empty.
  if (lines.size() < 2 || !lines.back().empty()) {
    throw ParseError(source, lines.size(), "corrupt domain list: truncated file");
  }
  const auto header = detail::split(lines[0], '\t');
  if (header.empty() || header[0] != kMagic) {
    if (!header.empty() && header[0].starts_with("rankweave-domains ")) {
      throw ParseError(source, 1, "unsupported domain list version '" + std::string(header[0]) +
                                      "', expected '" + std::string(kMagic) + "'");
    }
    throw ParseError(source, 1, "corrupt domain list: bad header");
  }
  DomainList list;
  if (header.size() != 3 || !header[1].starts_with("min_count=") ||
      !header[2].starts_with("min_rate=") ||
      !detail::parse_int64(header[1].substr(10), &list.min_count) ||
      !detail::parse_double(header[2].substr(9), &list.min_rate)) {
    throw ParseError(source, 1, "corrupt domain list: bad build parameters");
  }
  try {
    check_thresholds(list.min_count, list.min_rate);
  } catch (const ValidationError& e) {
    throw ParseError(source, 1, e.what());
  }

  for (std::size_t i = 1; i + 1 < lines.size(); ++i) {
    const auto fields = detail::split(lines[i], '\t');
    DomainStats s;
    if (fields.size() != 3 || fields[0].empty() || !detail::parse_int64(fields[1], &s.n_images) ||
        !detail::parse_int64(fields[2], &s.n_watermarked) || s.n_watermarked < 0 ||
        s.n_watermarked > s.n_images) {
      throw ParseError(source, i + 1, "corrupt domain list entry");
    }
    std::string domain(fields[0]);
    if (!list.entries.empty() && domain <= list.entries.rbegin()->first) {
      throw ParseError(source, i + 1, "corrupt domain list: entries not strictly sorted");
    }
    if (!qualifies(s, list.min_count, list.min_rate)) {
      throw ParseError(source, i + 1,
                       "corrupt domain list: entry '" + domain + "' violates the build thresholds");
    }
    list.entries.emplace_hint(list.entries.end(), std::move(domain), s);
  }
  return list;
}

void save_domain_list(const DomainList& list, const std::string& path) {
  detail::write_file(path, serialize_domain_list(list));
}

DomainList load_domain_list(const std::string& path) {
  return parse_domain_list_text(detail::read_file(path), path);
}

}  // namespace rankweave
