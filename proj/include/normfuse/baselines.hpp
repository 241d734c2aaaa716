#ifndef NORMFUSE_BASELINES_HPP
#define NORMFUSE_BASELINES_HPP

#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "normfuse/types.hpp"

namespace normfuse {

// Word -> per-dimension norm scores. Words are lowercase-normalized.
struct NormLexicon {
    Dimensions dimensions;
    std::unordered_map<std::string, Vec> scores;
};

struct EmbeddingTable {
    Eigen::Index dim = 0;
    std::unordered_map<std::string, Vec> vectors;
};

struct StopList {
    std::unordered_set<std::string> words;  // lowercase-normalized

    bool contains(const std::string& w) const { return words.count(w) > 0; }
};

enum class Aggregator { mean, max, min, sum };

std::optional<Aggregator> parse_aggregator(const std::string& name);

// Lowercases, strips leading/trailing punctuation, splits on whitespace.
// Tokens that are entirely punctuation are dropped.
std::vector<std::string> tokenize(const std::string& sentence);

/// Per-dimension aggregate of the word-level norms of the sentence's content
/// words (stoplist and out-of-lexicon words are skipped, duplicates count
/// multiply). Empty optional when no scored word remains.
std::optional<Vec> aggregate_norms(const std::vector<std::string>& tokens,
                                   const NormLexicon& lexicon, const StopList& stoplist,
                                   Aggregator agg);

struct SentenceFeatures {
    Vec features;
    bool any_found = false;  // false: no token had an embedding, features are zero
};

/// Unweighted mean of the embeddings of in-table tokens. Stoplist filtering
/// is off by default (it applies to norm aggregation, not features) but can
/// be switched on.
SentenceFeatures sentence_features(const std::vector<std::string>& tokens,
                                   const EmbeddingTable& table,
                                   const StopList* stoplist = nullptr);

}  // namespace normfuse

#endif
