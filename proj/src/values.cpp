#include "solar/values.hpp"

#include "solar/math.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace solar {

namespace {

const std::map<std::string, SchwartzValue>& schwartz_lookup() {
  static const std::map<std::string, SchwartzValue> table = [] {
    std::map<std::string, SchwartzValue> t;
    for (SchwartzValue v : kAllSchwartzValues) t[normalize_phrase(schwartz_name(v))] = v;
    return t;
  }();
  return table;
}

std::vector<std::string> split_csv(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    if (comma == std::string_view::npos) comma = text.size();
    std::string piece = trim(text.substr(start, comma - start));
    if (!piece.empty()) out.push_back(std::move(piece));
    start = comma + 1;
  }
  return out;
}

/// Extracts the string items of the first bracketed list in `reply`. Accepts
/// strict JSON and falls back to scanning quoted strings, which covers the
/// usual almost-JSON model output.
std::vector<std::string> bracketed_list_items(const std::string& reply) {
  std::size_t open = reply.find('[');
  std::size_t close = reply.rfind(']');
  if (open == std::string::npos || close == std::string::npos || close <= open) {
    throw ParseError("expected a bracketed list, got: " + reply.substr(0, 160));
  }
  std::string span = reply.substr(open, close - open + 1);

  ndjson::Json parsed = ndjson::Json::parse(span, nullptr, false);
  std::vector<std::string> items;
  if (!parsed.is_discarded() && parsed.is_array()) {
    for (const auto& item : parsed) {
      if (item.is_string()) items.push_back(item.get<std::string>());
    }
    return items;
  }

  bool in_string = false;
  bool escaped = false;
  std::string current;
  for (char c : span) {
    if (!in_string) {
      if (c == '"') in_string = true;
      continue;
    }
    if (escaped) {
      current.push_back(c);
      escaped = false;
    } else if (c == '\\') {
      escaped = true;
    } else if (c == '"') {
      items.push_back(current);
      current.clear();
      in_string = false;
    } else {
      current.push_back(c);
    }
  }
  return items;
}

/// Splits "A vs. B" into its two sides; also accepts "vs" without the dot.
std::pair<std::string, std::string> split_versus(const std::string& item) {
  std::string low = lowercase(item);
  for (const char* sep : {" vs. ", " vs "}) {
    std::size_t pos = low.find(sep);
    if (pos != std::string::npos) {
      std::string a = trim(item.substr(0, pos));
      std::string b = trim(item.substr(pos + std::string(sep).size()));
      if (a.empty() || b.empty()) break;
      return {a, b};
    }
  }
  throw ParseError("conflict item without \"vs.\": " + item);
}

struct SchwartzLines {
  std::string situation_line;
  std::string comment_line;
};

SchwartzLines find_marker_lines(const std::string& reply) {
  SchwartzLines out;
  std::istringstream in(reply);
  std::string line;
  while (std::getline(in, line)) {
    std::string trimmed = trim(line);
    if (trimmed.rfind("[Situation]", 0) == 0 && out.situation_line.empty()) {
      out.situation_line = trim(trimmed.substr(11));
    } else if (trimmed.rfind("[Comment]", 0) == 0 && out.comment_line.empty()) {
      out.comment_line = trim(trimmed.substr(9));
    }
  }
  if (out.situation_line.empty() || out.comment_line.empty()) {
    throw ParseError("missing [Situation]/[Comment] lines in: " + reply.substr(0, 160));
  }
  return out;
}

std::array<SchwartzValue, 2> parse_schwartz_pair(const std::string& csv) {
  std::vector<std::string> names = split_csv(csv);
  if (names.size() != 2) {
    throw ParseError("expected exactly two values, got \"" + csv + "\"");
  }
  std::array<SchwartzValue, 2> out{};
  for (std::size_t i = 0; i < 2; ++i) {
    auto v = parse_schwartz(names[i]);
    if (!v) throw ParseError("\"" + names[i] + "\" is not a Schwartz value");
    out[i] = *v;
  }
  if (out[0] == out[1]) throw ParseError("value pair must have distinct members: " + csv);
  return out;
}

SchwartzAnnotation parse_schwartz_reply(const std::string& reply) {
  SchwartzLines lines = find_marker_lines(reply);
  SchwartzAnnotation ann;
  ann.situation_values = parse_schwartz_pair(lines.situation_line);
  ann.comment_values = parse_schwartz_pair(lines.comment_line);
  return ann;
}

std::string sorted_joined(std::vector<std::string> phrases) {
  for (std::string& p : phrases) p = trim(p);
  std::sort(phrases.begin(), phrases.end());
  phrases.erase(std::unique(phrases.begin(), phrases.end()), phrases.end());
  std::string out;
  for (std::size_t i = 0; i < phrases.size(); ++i) {
    if (i) out += "; ";
    out += phrases[i];
  }
  return out;
}

}  // namespace

std::string schwartz_name(SchwartzValue value) {
  switch (value) {
    case SchwartzValue::SelfDirection: return "Self-Direction";
    case SchwartzValue::Stimulation: return "Stimulation";
    case SchwartzValue::Hedonism: return "Hedonism";
    case SchwartzValue::Achievement: return "Achievement";
    case SchwartzValue::Power: return "Power";
    case SchwartzValue::Security: return "Security";
    case SchwartzValue::Conformity: return "Conformity";
    case SchwartzValue::Tradition: return "Tradition";
    case SchwartzValue::Benevolence: return "Benevolence";
    case SchwartzValue::Universalism: return "Universalism";
  }
  throw Error("unknown Schwartz value");
}

std::optional<SchwartzValue> parse_schwartz(std::string_view text) {
  std::string key = normalize_phrase(text);
  const auto& table = schwartz_lookup();
  auto it = table.find(key);
  if (it != table.end()) return it->second;
  // "selfdirection" without separator
  std::string compact;
  for (char c : key) {
    if (c != ' ') compact.push_back(c);
  }
  for (const auto& [name, value] : table) {
    std::string name_compact;
    for (char c : name) {
      if (c != ' ') name_compact.push_back(c);
    }
    if (name_compact == compact) return value;
  }
  return std::nullopt;
}

std::string schwartz_text(const std::array<SchwartzValue, 2>& values) {
  return schwartz_name(values[0]) + ", " + schwartz_name(values[1]);
}

std::string render_tradeoff(const TradeOff& t) { return t.preferred + " > " + t.rejected; }

TradeOff parse_tradeoff_item(std::string_view item) {
  std::size_t pos = item.find('>');
  if (pos == std::string_view::npos) {
    throw ParseError("trade-off item without \">\": " + std::string(item));
  }
  TradeOff t;
  t.preferred = trim(item.substr(0, pos));
  t.rejected = trim(item.substr(pos + 1));
  if (t.preferred.empty() || t.rejected.empty()) {
    throw ParseError("trade-off item with an empty side: " + std::string(item));
  }
  if (t.preferred == t.rejected) {
    throw ParseError("trade-off sides must differ: " + std::string(item));
  }
  return t;
}

SchwartzAnnotation annotate_schwartz(const Situation& situation, const std::string& comment,
                                     ChatClient& chat, const PromptTemplates& templates,
                                     std::size_t prompt_limit) {
  if (comment.empty()) throw Error("annotate_schwartz requires a non-empty comment");
  std::string prompt = render_template(
      templates.schwartz(),
      {{"situation", situation_text(situation, prompt_limit)}, {"comment", comment}});

  ChatRequest request;
  request.user_text = prompt;
  std::string reply = chat.chat(request);
  try {
    return parse_schwartz_reply(reply);
  } catch (const ParseError&) {
    request.user_text =
        prompt +
        "\n\nReminder: respond with exactly two lines:\n"
        "[Situation] Schwartz_value_A, Schwartz_value_B\n"
        "[Comment] Schwartz_value_C, Schwartz_value_D";
    std::string retry_reply = chat.chat(request);
    try {
      return parse_schwartz_reply(retry_reply);
    } catch (const ParseError& e) {
      throw ParseError(std::string("schwartz annotation unparseable after retry: ") + e.what() +
                       "; raw reply: " + retry_reply.substr(0, 200));
    }
  }
}

std::vector<ValueConflict> annotate_conflicts(const Situation& situation, ChatClient& chat,
                                              const PromptTemplates& templates,
                                              std::size_t prompt_limit) {
  std::string prompt = render_template(templates.conflicts(),
                                       {{"situation", situation_text(situation, prompt_limit)}});
  ChatRequest request;
  request.user_text = prompt;
  std::string reply = chat.chat(request);

  std::vector<std::string> items = bracketed_list_items(reply);
  if (items.empty()) throw ParseError("no conflicts in reply: " + reply.substr(0, 160));

  std::vector<ValueConflict> out;
  for (const std::string& item : items) {
    auto [a, b] = split_versus(item);
    if (normalize_phrase(a) == normalize_phrase(b)) {
      throw ParseError("conflict with identical sides: " + item);
    }
    out.push_back({a, b});
  }
  return out;
}

namespace {

struct PhraseMatcher {
  std::vector<std::string> canon;       // conflict phrases in order a0,b0,a1,b1,...
  std::vector<std::string> normalized;  // normalize_phrase of each
  std::vector<Vec> vectors;             // filled lazily when an embedder is available

  /// Index into `canon`, or npos.
  std::size_t match(const std::string& phrase, EmbeddingClient* matcher) {
    std::string norm = normalize_phrase(phrase);
    for (std::size_t i = 0; i < normalized.size(); ++i) {
      if (normalized[i] == norm) return i;
    }
    if (!matcher || canon.empty()) return npos;
    if (vectors.empty()) {
      vectors = matcher->embed_batch(canon);
    }
    Vec q = matcher->embed_batch({phrase})[0];
    double best = -1;
    std::size_t best_i = npos;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      double denom = q.norm() * vectors[i].norm();
      if (denom <= 0) continue;
      double cos = q.dot(vectors[i]) / denom;
      if (cos > best) {
        best = cos;
        best_i = i;
      }
    }
    return best >= 0.8 ? best_i : npos;
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

}  // namespace

std::vector<TradeOff> annotate_tradeoffs(const Situation& situation,
                                         const std::vector<ValueConflict>& conflicts,
                                         const std::string& comment,
                                         const std::string& instance_id, ChatClient& chat,
                                         const PromptTemplates& templates,
                                         EmbeddingClient* matcher, std::size_t prompt_limit) {
  if (conflicts.empty()) throw Error("annotate_tradeoffs requires a non-empty conflict list");

  std::string conflict_list;
  for (std::size_t i = 0; i < conflicts.size(); ++i) {
    if (i) conflict_list += ", ";
    conflict_list += conflicts[i].value_a + " vs. " + conflicts[i].value_b;
  }
  std::string prompt =
      render_template(templates.tradeoffs(), {{"situation", situation_text(situation, prompt_limit)},
                                              {"conflicts", conflict_list},
                                              {"comment", comment}});
  ChatRequest request;
  request.user_text = prompt;
  std::string reply = chat.chat(request);

  std::vector<std::string> items = bracketed_list_items(reply);
  if (items.empty()) throw ParseError("no trade-offs in reply: " + reply.substr(0, 160));

  PhraseMatcher phrase_matcher;
  for (const ValueConflict& c : conflicts) {
    phrase_matcher.canon.push_back(c.value_a);
    phrase_matcher.normalized.push_back(normalize_phrase(c.value_a));
    phrase_matcher.canon.push_back(c.value_b);
    phrase_matcher.normalized.push_back(normalize_phrase(c.value_b));
  }

  std::vector<TradeOff> out;
  for (const std::string& item : items) {
    TradeOff t = parse_tradeoff_item(item);
    t.source_instance = instance_id;

    std::size_t pi = phrase_matcher.match(t.preferred, matcher);
    std::size_t ri = phrase_matcher.match(t.rejected, matcher);
    // Canonical only when both sides resolve to the two ends of one conflict.
    if (pi != PhraseMatcher::npos && ri != PhraseMatcher::npos && pi / 2 == ri / 2 && pi != ri) {
      t.preferred = phrase_matcher.canon[pi];
      t.rejected = phrase_matcher.canon[ri];
      t.model_generated = false;
    } else {
      t.model_generated = true;
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<ValueCluster> cluster_values(const std::vector<std::string>& phrases,
                                         EmbeddingClient& embed, const ClusteringParams& params) {
  if (params.min_cluster_size < 1) throw Error("min_cluster_size must be >= 1");
  if (phrases.size() < 2 * static_cast<std::size_t>(params.min_cluster_size)) {
    throw Error("clustering requires at least " + std::to_string(2 * params.min_cluster_size) +
                " phrases, got " + std::to_string(phrases.size()));
  }
  if (params.embed_dim > 0 && embed.dim() != params.embed_dim) {
    throw Error("embedding client dim " + std::to_string(embed.dim()) +
                " does not match requested " + std::to_string(params.embed_dim));
  }

  std::vector<Vec> vectors = embed.embed_batch(phrases);
  const auto n = static_cast<Eigen::Index>(vectors.size());
  Mat data(n, vectors[0].size());
  for (Eigen::Index i = 0; i < n; ++i) data.row(i) = vectors[static_cast<std::size_t>(i)];

  bool all_identical = true;
  for (Eigen::Index i = 1; i < n && all_identical; ++i) {
    if ((data.row(i) - data.row(0)).norm() > 0) all_identical = false;
  }
  if (all_identical) throw Error("degenerate embeddings: all phrases embed identically");

  Mat reduced = math::pca_reduce(data, params.reduce_dim);

  double eps = math::kdistance_elbow(reduced, params.min_cluster_size);
  std::vector<int> labels = math::dbscan(reduced, eps, params.min_cluster_size);

  // Dissolve undersized density clusters back into the leftover pool.
  std::map<int, std::int64_t> sizes;
  for (int label : labels) {
    if (label >= 0) ++sizes[label];
  }
  for (int& label : labels) {
    if (label >= 0 && sizes[label] < params.min_cluster_size) label = -1;
  }

  // Compact labels and compute frozen centroids of the surviving clusters.
  std::map<int, int> relabel;
  for (int label : labels) {
    if (label >= 0 && !relabel.count(label)) {
      int next = static_cast<int>(relabel.size());
      relabel[label] = next;
    }
  }
  for (int& label : labels) {
    if (label >= 0) label = relabel[label];
  }
  const int initial_clusters = static_cast<int>(relabel.size());

  Mat centroids = Mat::Zero(std::max(initial_clusters, 1), reduced.cols());
  std::vector<std::int64_t> counts(static_cast<std::size_t>(std::max(initial_clusters, 1)), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    int label = labels[static_cast<std::size_t>(i)];
    if (label >= 0) {
      centroids.row(label) += reduced.row(i);
      ++counts[static_cast<std::size_t>(label)];
    }
  }
  for (int c = 0; c < initial_clusters; ++c) {
    centroids.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
  }

  // Leftovers: nearest centroid when strictly inside the threshold.
  std::vector<Eigen::Index> leftovers;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels[static_cast<std::size_t>(i)] != -1) continue;
    if (initial_clusters > 0) {
      int best = 0;
      double best_d = (reduced.row(i) - centroids.row(0)).norm();
      for (int c = 1; c < initial_clusters; ++c) {
        double d = (reduced.row(i) - centroids.row(c)).norm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (best_d < params.assignment_threshold) {
        labels[static_cast<std::size_t>(i)] = best;
        continue;
      }
    }
    leftovers.push_back(i);
  }

  // Remaining leftovers grouped by k-means, sized so fallback clusters aim at
  // min_cluster_size scale.
  int total_clusters = initial_clusters;
  if (!leftovers.empty()) {
    int k = static_cast<int>(std::llround(static_cast<double>(leftovers.size()) /
                                          static_cast<double>(params.min_cluster_size)));
    k = std::max(1, std::min<int>(k, static_cast<int>(leftovers.size())));
    Mat leftover_data(static_cast<Eigen::Index>(leftovers.size()), reduced.cols());
    for (std::size_t i = 0; i < leftovers.size(); ++i) {
      leftover_data.row(static_cast<Eigen::Index>(i)) = reduced.row(leftovers[i]);
    }
    math::KMeansResult km = math::kmeans(leftover_data, k, params.seed);
    for (std::size_t i = 0; i < leftovers.size(); ++i) {
      labels[static_cast<std::size_t>(leftovers[i])] = initial_clusters + km.labels[i];
    }
    total_clusters += k;
  }

  std::vector<ValueCluster> clusters(static_cast<std::size_t>(total_clusters));
  for (int c = 0; c < total_clusters; ++c) clusters[static_cast<std::size_t>(c)].cluster_id = c;
  for (std::size_t i = 0; i < phrases.size(); ++i) {
    int label = labels[i];
    if (label < 0) throw Error("internal error: unassigned phrase after clustering");
    ValueCluster& cluster = clusters[static_cast<std::size_t>(label)];
    cluster.items.push_back(i);
    cluster.item_texts.push_back(phrases[i]);
    if (std::find(cluster.members.begin(), cluster.members.end(), phrases[i]) ==
        cluster.members.end()) {
      cluster.members.push_back(phrases[i]);
    }
  }
  // k-means can leave empty fallback slots only when k > distinct points; drop them.
  clusters.erase(std::remove_if(clusters.begin(), clusters.end(),
                                [](const ValueCluster& c) { return c.items.empty(); }),
                 clusters.end());
  for (std::size_t c = 0; c < clusters.size(); ++c) clusters[c].cluster_id = static_cast<int>(c);
  return clusters;
}

namespace {

constexpr std::size_t kNamingExampleCap = 100;

std::string naming_examples(const ValueCluster& cluster) {
  std::string out;
  std::size_t shown = std::min(cluster.items.size(), kNamingExampleCap);
  for (std::size_t i = 0; i < shown; ++i) {
    out += "- " + std::to_string(cluster.items[i]) + ". " + cluster.item_texts[i] + "\n";
  }
  if (!out.empty()) out.pop_back();
  return out;
}

std::size_t word_count(const std::string& text) {
  std::istringstream in(text);
  std::string w;
  std::size_t n = 0;
  while (in >> w) ++n;
  return n;
}

}  // namespace

std::vector<ValueCluster> name_clusters(std::vector<ValueCluster> clusters, ChatClient& chat,
                                        const PromptTemplates& templates) {
  for (ValueCluster& cluster : clusters) {
    if (cluster.items.empty()) throw Error("name_clusters requires non-empty clusters");
    std::string prompt =
        render_template(templates.concept_naming(), {{"examples", naming_examples(cluster)}});
    ChatRequest request;
    request.user_text = prompt;
    std::string reply = chat.chat(request);

    std::string name;
    std::string descriptor;
    std::vector<std::size_t> exemplars;
    std::istringstream in(reply);
    std::string line;
    while (std::getline(in, line)) {
      std::string t = trim(line);
      if (t.rfind("NAME:", 0) == 0) {
        name = trim(t.substr(5));
      } else if (t.rfind("PROMPT:", 0) == 0) {
        descriptor = trim(t.substr(7));
      } else if (t.rfind("EXAMPLE_IDS:", 0) == 0) {
        std::string ids = t.substr(12);
        std::string digits;
        for (char c : ids) {
          if (std::isdigit(static_cast<unsigned char>(c))) {
            digits.push_back(c);
          } else if (!digits.empty()) {
            exemplars.push_back(std::stoull(digits));
            digits.clear();
          }
        }
        if (!digits.empty()) exemplars.push_back(std::stoull(digits));
      }
    }

    if (name.empty() || descriptor.empty()) {
      throw ParseError("cluster naming reply missing NAME/PROMPT: " + reply.substr(0, 160));
    }
    if (word_count(name) > 8) {
      throw ParseError("cluster name exceeds 8 words: " + name);
    }
    if (exemplars.size() != 3) {
      throw ParseError("expected exactly 3 exemplar ids, got " +
                       std::to_string(exemplars.size()));
    }
    for (std::size_t id : exemplars) {
      if (std::find(cluster.items.begin(), cluster.items.end(), id) == cluster.items.end()) {
        throw ParseError("exemplar id " + std::to_string(id) + " is not a member of cluster " +
                         std::to_string(cluster.cluster_id));
      }
    }
    cluster.name = std::move(name);
    cluster.descriptor = std::move(descriptor);
    cluster.exemplars = std::move(exemplars);
  }
  return clusters;
}

std::string value_text(const std::vector<ValueConflict>& conflicts) {
  if (conflicts.empty()) throw Error("value_text requires a non-empty list");
  std::vector<std::string> phrases;
  for (const ValueConflict& c : conflicts) {
    phrases.push_back(c.value_a);
    phrases.push_back(c.value_b);
  }
  return sorted_joined(std::move(phrases));
}

std::string value_text(const std::vector<TradeOff>& tradeoffs) {
  if (tradeoffs.empty()) throw Error("value_text requires a non-empty list");
  std::vector<std::string> phrases;
  for (const TradeOff& t : tradeoffs) {
    phrases.push_back(t.preferred);
    phrases.push_back(t.rejected);
  }
  return sorted_joined(std::move(phrases));
}

}  // namespace solar
