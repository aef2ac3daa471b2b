#pragma once

#include "solar/ndjson.hpp"
#include "solar/util.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace solar {

/// Community verdict codes as they appear in comments.
enum class VerdictCode { YTA, YWBTA, NTA, YWNBTA, ESH, NAH, INFO };

/// Binary acceptability judgment. INFO verdicts carry no judgment.
enum class Judgment { Acceptable, Unacceptable };

std::optional<VerdictCode> parse_verdict(std::string_view text);
std::string verdict_name(VerdictCode code);

/// NTA/NAH/YWNBTA -> Acceptable, YTA/ESH/YWBTA -> Unacceptable, INFO -> none.
std::optional<Judgment> map_verdict(VerdictCode code);

std::string judgment_label(Judgment j);
std::optional<Judgment> parse_judgment_label(std::string_view text);

struct Situation {
  std::string situation_id;
  std::string title;
  std::string body;
};

/// Title and body joined for embedding and prompting. `limit` of 0 means no
/// truncation.
std::string situation_text(const Situation& s, std::size_t limit = 0);

struct Instance {
  std::string instance_id;
  std::string situation_id;
  std::string redditor_id;
  std::string comment;
  VerdictCode verdict = VerdictCode::INFO;
  std::optional<Judgment> judgment;  // derived from verdict at ingest
  std::string created_at;            // optional passthrough
};

struct Corpus {
  std::map<std::string, Situation> situations;
  std::vector<Instance> instances;
  std::set<std::string> redditors;

  const Situation& situation(const std::string& situation_id) const;
  std::vector<const Instance*> instances_of(const std::string& redditor_id) const;
};

struct IngestIssue {
  std::size_t line_no = 0;
  std::string message;
  std::string raw;  // offending line, truncated
};

struct IngestResult {
  Corpus corpus;
  std::vector<IngestIssue> issues;  // quarantined records, never silently dropped
};

/// Reads newline-delimited JSON records with fields instance_id, situation_id,
/// situation_title, situation_body, redditor_id, comment, verdict and optional
/// created_at. Malformed records land in the issue report.
IngestResult ingest_ndjson(const std::filesystem::path& file);
IngestResult ingest_lines(const std::vector<std::pair<std::size_t, std::string>>& lines,
                          const std::string& origin);

/// Writes the corpus back out in the ingest format plus a `judgment` field
/// for non-INFO instances. Record order follows `corpus.instances`.
void write_corpus_ndjson(const Corpus& corpus, const std::filesystem::path& file);

/// Keeps the neighborhood of highly active redditors:
///   1. anchors = redditors with more than `activity_threshold` instances;
///   2. keep situations with at least one anchor comment;
///   3. keep the top `redditor_cap` redditors by instance count on those
///      situations (ties broken by id), then drop situations that lost all
///      anchor comments and redditors that lost all instances.
/// Deterministic, and a fixed point under re-application.
Corpus truncate(const Corpus& corpus, int activity_threshold, int redditor_cap);

struct RedditorLabelCounts {
  std::string redditor_id;
  std::int64_t acceptable = 0;
  std::int64_t unacceptable = 0;
  double skewness = 0.0;  // |fraction acceptable - 0.5|
};

struct CorpusStats {
  std::size_t instance_count = 0;
  std::size_t situation_count = 0;
  std::size_t redditor_count = 0;
  std::int64_t min_instances_per_redditor = 0;
  std::int64_t max_instances_per_redditor = 0;
  std::int64_t acceptable_total = 0;
  std::int64_t unacceptable_total = 0;
  std::vector<RedditorLabelCounts> most_skewed;
};

/// Exact counts over the corpus. `skew_top_k` selects how many of the most
/// label-skewed redditors are reported separately.
CorpusStats stats(const Corpus& corpus, std::size_t skew_top_k = 3);

ndjson::Json stats_to_json(const CorpusStats& s);

}  // namespace solar
