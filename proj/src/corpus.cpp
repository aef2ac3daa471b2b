#include "solar/corpus.hpp"

#include <algorithm>

namespace solar {

namespace {

constexpr std::size_t kIssueRawLimit = 200;

std::string truncate_raw(const std::string& line) {
  if (line.size() <= kIssueRawLimit) return line;
  return line.substr(0, kIssueRawLimit) + "...";
}

}  // namespace

std::optional<VerdictCode> parse_verdict(std::string_view text) {
  std::string t = lowercase(trim(text));
  if (t == "yta") return VerdictCode::YTA;
  if (t == "ywbta") return VerdictCode::YWBTA;
  if (t == "nta") return VerdictCode::NTA;
  if (t == "ywnbta") return VerdictCode::YWNBTA;
  if (t == "esh") return VerdictCode::ESH;
  if (t == "nah") return VerdictCode::NAH;
  if (t == "info") return VerdictCode::INFO;
  return std::nullopt;
}

std::string verdict_name(VerdictCode code) {
  switch (code) {
    case VerdictCode::YTA: return "YTA";
    case VerdictCode::YWBTA: return "YWBTA";
    case VerdictCode::NTA: return "NTA";
    case VerdictCode::YWNBTA: return "YWNBTA";
    case VerdictCode::ESH: return "ESH";
    case VerdictCode::NAH: return "NAH";
    case VerdictCode::INFO: return "INFO";
  }
  throw Error("unknown verdict code");
}

std::optional<Judgment> map_verdict(VerdictCode code) {
  switch (code) {
    case VerdictCode::NTA:
    case VerdictCode::NAH:
    case VerdictCode::YWNBTA:
      return Judgment::Acceptable;
    case VerdictCode::YTA:
    case VerdictCode::ESH:
    case VerdictCode::YWBTA:
      return Judgment::Unacceptable;
    case VerdictCode::INFO:
      return std::nullopt;
  }
  throw Error("unknown verdict code");
}

std::string judgment_label(Judgment j) {
  return j == Judgment::Acceptable ? "Acceptable" : "Unacceptable";
}

std::optional<Judgment> parse_judgment_label(std::string_view text) {
  std::string t = lowercase(trim(text));
  if (t == "acceptable") return Judgment::Acceptable;
  if (t == "unacceptable") return Judgment::Unacceptable;
  return std::nullopt;
}

std::string situation_text(const Situation& s, std::size_t limit) {
  std::string text = s.title;
  if (!s.body.empty()) {
    text += "\n\n";
    text += s.body;
  }
  if (limit > 0 && text.size() > limit) text.resize(limit);
  return text;
}

const Situation& Corpus::situation(const std::string& situation_id) const {
  auto it = situations.find(situation_id);
  if (it == situations.end()) throw Error("unknown situation: " + situation_id);
  return it->second;
}

std::vector<const Instance*> Corpus::instances_of(const std::string& redditor_id) const {
  std::vector<const Instance*> out;
  for (const Instance& inst : instances) {
    if (inst.redditor_id == redditor_id) out.push_back(&inst);
  }
  return out;
}

namespace {

IngestResult ingest_impl(const std::function<void(
    const std::function<void(std::size_t, const std::string&)>&)>& scan) {
  IngestResult result;
  std::set<std::string> seen_instance_ids;

  scan([&](std::size_t line_no, const std::string& line) {
    ndjson::Json record = ndjson::Json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      result.issues.push_back({line_no, "invalid JSON record", truncate_raw(line)});
      return;
    }

    auto text_field = [&](const char* name) -> std::optional<std::string> {
      auto it = record.find(name);
      if (it == record.end() || !it->is_string()) return std::nullopt;
      return it->get<std::string>();
    };

    auto instance_id = text_field("instance_id");
    auto situation_id = text_field("situation_id");
    auto title = text_field("situation_title");
    auto body = text_field("situation_body");
    auto redditor_id = text_field("redditor_id");
    auto comment = text_field("comment");
    auto verdict_text = text_field("verdict");

    if (!instance_id || instance_id->empty() || !situation_id || situation_id->empty() ||
        !title || !redditor_id || redditor_id->empty() || !comment || !verdict_text) {
      result.issues.push_back({line_no, "missing required field", truncate_raw(line)});
      return;
    }
    if (trim(*title).empty()) {
      result.issues.push_back({line_no, "empty situation_title", truncate_raw(line)});
      return;
    }

    auto verdict = parse_verdict(*verdict_text);
    if (!verdict) {
      result.issues.push_back(
          {line_no, "unknown verdict \"" + *verdict_text + "\"", truncate_raw(line)});
      return;
    }
    if (!seen_instance_ids.insert(*instance_id).second) {
      result.issues.push_back(
          {line_no, "duplicate instance_id \"" + *instance_id + "\"", truncate_raw(line)});
      return;
    }

    auto sit = result.corpus.situations.find(*situation_id);
    if (sit == result.corpus.situations.end()) {
      result.corpus.situations.emplace(*situation_id, Situation{*situation_id, *title, body ? *body : ""});
    } else if (sit->second.title != *title || (body && sit->second.body != *body)) {
      result.issues.push_back(
          {line_no, "situation text conflicts with earlier record for \"" + *situation_id + "\"",
           truncate_raw(line)});
      return;
    }

    Instance inst;
    inst.instance_id = *instance_id;
    inst.situation_id = *situation_id;
    inst.redditor_id = *redditor_id;
    inst.comment = *comment;
    inst.verdict = *verdict;
    inst.judgment = map_verdict(*verdict);
    if (auto created = text_field("created_at")) inst.created_at = *created;

    result.corpus.redditors.insert(inst.redditor_id);
    result.corpus.instances.push_back(std::move(inst));
  });

  // A situation registered by a record that later got quarantined (conflict on
  // a duplicate id) still has at least one good instance by construction, so
  // referential integrity holds. Drop situations with zero instances anyway.
  std::set<std::string> used;
  for (const Instance& inst : result.corpus.instances) used.insert(inst.situation_id);
  for (auto it = result.corpus.situations.begin(); it != result.corpus.situations.end();) {
    if (!used.count(it->first)) {
      it = result.corpus.situations.erase(it);
    } else {
      ++it;
    }
  }
  return result;
}

}  // namespace

IngestResult ingest_ndjson(const std::filesystem::path& file) {
  return ingest_impl([&](const std::function<void(std::size_t, const std::string&)>& fn) {
    ndjson::for_each_line(file, fn);
  });
}

IngestResult ingest_lines(const std::vector<std::pair<std::size_t, std::string>>& lines,
                          const std::string& /*origin*/) {
  return ingest_impl([&](const std::function<void(std::size_t, const std::string&)>& fn) {
    for (const auto& [line_no, line] : lines) fn(line_no, line);
  });
}

void write_corpus_ndjson(const Corpus& corpus, const std::filesystem::path& file) {
  ndjson::Writer out(file);
  for (const Instance& inst : corpus.instances) {
    const Situation& sit = corpus.situation(inst.situation_id);
    ndjson::Json record;
    record["instance_id"] = inst.instance_id;
    record["situation_id"] = inst.situation_id;
    record["situation_title"] = sit.title;
    record["situation_body"] = sit.body;
    record["redditor_id"] = inst.redditor_id;
    record["comment"] = inst.comment;
    record["verdict"] = verdict_name(inst.verdict);
    if (inst.judgment) record["judgment"] = judgment_label(*inst.judgment);
    if (!inst.created_at.empty()) record["created_at"] = inst.created_at;
    out.write(record);
  }
  out.close();
}

Corpus truncate(const Corpus& corpus, int activity_threshold, int redditor_cap) {
  if (activity_threshold < 1) throw Error("activity_threshold must be >= 1");
  if (redditor_cap < 1) throw Error("redditor_cap must be >= 1");

  std::map<std::string, std::int64_t> counts;
  for (const Instance& inst : corpus.instances) ++counts[inst.redditor_id];

  std::set<std::string> anchors;
  std::int64_t max_count = 0;
  for (const auto& [id, n] : counts) {
    max_count = std::max(max_count, n);
    if (n > activity_threshold) anchors.insert(id);
  }
  if (anchors.empty()) {
    throw Error("no redditor exceeds activity threshold " + std::to_string(activity_threshold) +
                " (max observed count: " + std::to_string(max_count) + ")");
  }

  // Situations touched by at least one anchor.
  std::set<std::string> anchor_situations;
  for (const Instance& inst : corpus.instances) {
    if (anchors.count(inst.redditor_id)) anchor_situations.insert(inst.situation_id);
  }

  // Rank redditors by instance count restricted to those situations.
  std::map<std::string, std::int64_t> restricted_counts;
  for (const Instance& inst : corpus.instances) {
    if (anchor_situations.count(inst.situation_id)) ++restricted_counts[inst.redditor_id];
  }
  std::vector<std::pair<std::string, std::int64_t>> ranked(restricted_counts.begin(),
                                                           restricted_counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::set<std::string> kept_redditors;
  for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(redditor_cap); ++i) {
    kept_redditors.insert(ranked[i].first);
  }

  // Situations must retain a comment from a kept anchor, otherwise dropping a
  // low-ranked anchor would strand them and re-application would differ.
  std::set<std::string> kept_anchors;
  for (const std::string& a : anchors) {
    if (kept_redditors.count(a)) kept_anchors.insert(a);
  }
  std::set<std::string> kept_situations;
  for (const Instance& inst : corpus.instances) {
    if (kept_anchors.count(inst.redditor_id)) kept_situations.insert(inst.situation_id);
  }

  Corpus out;
  for (const Instance& inst : corpus.instances) {
    if (!kept_redditors.count(inst.redditor_id)) continue;
    if (!kept_situations.count(inst.situation_id)) continue;
    out.instances.push_back(inst);
    out.redditors.insert(inst.redditor_id);
  }
  for (const std::string& sid : kept_situations) {
    auto it = corpus.situations.find(sid);
    if (it != corpus.situations.end()) out.situations.emplace(sid, it->second);
  }
  // Drop situations that lost every instance.
  std::set<std::string> used;
  for (const Instance& inst : out.instances) used.insert(inst.situation_id);
  for (auto it = out.situations.begin(); it != out.situations.end();) {
    if (!used.count(it->first)) {
      it = out.situations.erase(it);
    } else {
      ++it;
    }
  }
  return out;
}

CorpusStats stats(const Corpus& corpus, std::size_t skew_top_k) {
  if (corpus.instances.empty()) throw Error("stats requires a non-empty corpus");

  CorpusStats s;
  s.instance_count = corpus.instances.size();
  s.situation_count = corpus.situations.size();
  s.redditor_count = corpus.redditors.size();

  std::map<std::string, std::int64_t> counts;
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> labels;  // acceptable, unacceptable
  for (const Instance& inst : corpus.instances) {
    ++counts[inst.redditor_id];
    if (inst.judgment) {
      auto& lc = labels[inst.redditor_id];
      if (*inst.judgment == Judgment::Acceptable) {
        ++lc.first;
        ++s.acceptable_total;
      } else {
        ++lc.second;
        ++s.unacceptable_total;
      }
    }
  }

  s.min_instances_per_redditor = counts.begin()->second;
  s.max_instances_per_redditor = counts.begin()->second;
  for (const auto& [id, n] : counts) {
    s.min_instances_per_redditor = std::min(s.min_instances_per_redditor, n);
    s.max_instances_per_redditor = std::max(s.max_instances_per_redditor, n);
  }

  std::vector<RedditorLabelCounts> skew;
  for (const auto& [id, lc] : labels) {
    std::int64_t total = lc.first + lc.second;
    if (total == 0) continue;
    RedditorLabelCounts r;
    r.redditor_id = id;
    r.acceptable = lc.first;
    r.unacceptable = lc.second;
    r.skewness = std::abs(static_cast<double>(lc.first) / static_cast<double>(total) - 0.5);
    skew.push_back(std::move(r));
  }
  std::sort(skew.begin(), skew.end(), [](const RedditorLabelCounts& a, const RedditorLabelCounts& b) {
    if (a.skewness != b.skewness) return a.skewness > b.skewness;
    return a.redditor_id < b.redditor_id;
  });
  if (skew.size() > skew_top_k) skew.resize(skew_top_k);
  s.most_skewed = std::move(skew);
  return s;
}

ndjson::Json stats_to_json(const CorpusStats& s) {
  ndjson::Json j;
  j["instances"] = s.instance_count;
  j["situations"] = s.situation_count;
  j["redditors"] = s.redditor_count;
  j["min_instances_per_redditor"] = s.min_instances_per_redditor;
  j["max_instances_per_redditor"] = s.max_instances_per_redditor;
  j["labels"] = {{"acceptable", s.acceptable_total}, {"unacceptable", s.unacceptable_total}};
  ndjson::Json skew = ndjson::Json::array();
  std::int64_t skew_a = 0;
  std::int64_t skew_u = 0;
  for (const RedditorLabelCounts& r : s.most_skewed) {
    skew.push_back({{"redditor_id", r.redditor_id},
                    {"acceptable", r.acceptable},
                    {"unacceptable", r.unacceptable},
                    {"skewness", r.skewness}});
    skew_a += r.acceptable;
    skew_u += r.unacceptable;
  }
  j["most_skewed"] = std::move(skew);
  j["labels_skewed"] = {{"acceptable", skew_a}, {"unacceptable", skew_u}};
  return j;
}

}  // namespace solar
