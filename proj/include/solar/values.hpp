#pragma once

#include "solar/corpus.hpp"
#include "solar/prompts.hpp"
#include "solar/providers.hpp"
#include "solar/util.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace solar {

inline constexpr std::size_t kDefaultPromptLimit = 2000;

/// The ten basic human values of Schwartz's theory.
enum class SchwartzValue {
  SelfDirection,
  Stimulation,
  Hedonism,
  Achievement,
  Power,
  Security,
  Conformity,
  Tradition,
  Benevolence,
  Universalism,
};

inline constexpr std::array<SchwartzValue, 10> kAllSchwartzValues = {
    SchwartzValue::SelfDirection, SchwartzValue::Stimulation, SchwartzValue::Hedonism,
    SchwartzValue::Achievement,   SchwartzValue::Power,       SchwartzValue::Security,
    SchwartzValue::Conformity,    SchwartzValue::Tradition,   SchwartzValue::Benevolence,
    SchwartzValue::Universalism,
};

std::string schwartz_name(SchwartzValue value);
/// Case-insensitive, tolerant of hyphen/space variants ("self-direction",
/// "Self Direction"). Returns nothing for non-Schwartz names.
std::optional<SchwartzValue> parse_schwartz(std::string_view text);

/// Top-two values observed in the situation and in the comment.
struct SchwartzAnnotation {
  std::array<SchwartzValue, 2> situation_values;
  std::array<SchwartzValue, 2> comment_values;
};

/// Comma-joined display names, annotation order preserved.
std::string schwartz_text(const std::array<SchwartzValue, 2>& values);

struct ValueConflict {
  std::string value_a;
  std::string value_b;
};

struct TradeOff {
  std::string preferred;
  std::string rejected;
  std::string source_instance;
  bool model_generated = false;  // pair not drawn from the situation's conflict list
};

std::string render_tradeoff(const TradeOff& t);
TradeOff parse_tradeoff_item(std::string_view item);

struct ValueCluster {
  int cluster_id = -1;
  std::string name;        // filled by name_clusters
  std::string descriptor;  // one-sentence matching prompt
  std::vector<std::size_t> items;      // indices into the clustered phrase list
  std::vector<std::string> item_texts; // parallel to items
  std::vector<std::string> members;    // unique phrase texts, first occurrence order
  std::vector<std::size_t> exemplars;  // 3 item ids, subset of items
};

struct ClusteringParams {
  int embed_dim = 256;
  int reduce_dim = 2;
  int min_cluster_size = 100;
  double assignment_threshold = 0.95;  // strict Euclidean bound in reduced space
  std::uint64_t seed = 0;
};

/// Prompts for the two most salient values in situation and comment, parses
/// the two-line reply. An unparseable reply is retried once with a format
/// reminder, then fails with the raw text attached.
SchwartzAnnotation annotate_schwartz(const Situation& situation, const std::string& comment,
                                     ChatClient& chat, const PromptTemplates& templates,
                                     std::size_t prompt_limit = kDefaultPromptLimit);

/// Prompts for the conflicting value pairs of a situation; parses "A vs. B"
/// items out of a bracketed list.
std::vector<ValueConflict> annotate_conflicts(const Situation& situation, ChatClient& chat,
                                              const PromptTemplates& templates,
                                              std::size_t prompt_limit = kDefaultPromptLimit);

/// Prompts for the trade-off direction of each conflict relevant to the
/// comment; parses "A > B" items. Sides are matched back to the conflict list
/// by normalized text, then by embedding cosine (>= 0.8) when `matcher` is
/// given; unmatched pairs are kept and flagged model-generated.
std::vector<TradeOff> annotate_tradeoffs(const Situation& situation,
                                         const std::vector<ValueConflict>& conflicts,
                                         const std::string& comment,
                                         const std::string& instance_id, ChatClient& chat,
                                         const PromptTemplates& templates,
                                         EmbeddingClient* matcher = nullptr,
                                         std::size_t prompt_limit = kDefaultPromptLimit);

/// Groups value phrases into abstract concepts: embeds, reduces, density
/// clusters with a minimum size, then sweeps leftovers into the nearest
/// centroid within the assignment threshold and k-means for the rest. Every
/// input item lands in exactly one cluster.
std::vector<ValueCluster> cluster_values(const std::vector<std::string>& phrases,
                                         EmbeddingClient& embed, const ClusteringParams& params);

/// Fills name/descriptor/exemplars per cluster from a concept-summary prompt.
std::vector<ValueCluster> name_clusters(std::vector<ValueCluster> clusters, ChatClient& chat,
                                        const PromptTemplates& templates);

/// Canonical embeddable string for a set of value annotations: unique phrases,
/// lexicographic order, joined by "; ". Invariant under input permutation.
std::string value_text(const std::vector<ValueConflict>& conflicts);
std::string value_text(const std::vector<TradeOff>& tradeoffs);

}  // namespace solar
