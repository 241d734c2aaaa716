#include "normfuse/baselines.hpp"

#include <algorithm>
#include <cctype>

namespace normfuse {

std::optional<Aggregator> parse_aggregator(const std::string& name) {
    if (name == "mean") return Aggregator::mean;
    if (name == "max") return Aggregator::max;
    if (name == "min") return Aggregator::min;
    if (name == "sum") return Aggregator::sum;
    return std::nullopt;
}

std::vector<std::string> tokenize(const std::string& sentence) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        // strip leading/trailing punctuation
        std::size_t begin = 0, end = current.size();
        while (begin < end && std::ispunct(static_cast<unsigned char>(current[begin]))) ++begin;
        while (end > begin && std::ispunct(static_cast<unsigned char>(current[end - 1]))) --end;
        if (end > begin) tokens.push_back(current.substr(begin, end - begin));
        current.clear();
    };
    for (char c : sentence) {
        if (std::isspace(static_cast<unsigned char>(c))) flush();
        else current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    flush();
    return tokens;
}

std::optional<Vec> aggregate_norms(const std::vector<std::string>& tokens,
                                   const NormLexicon& lexicon, const StopList& stoplist,
                                   Aggregator agg) {
    Vec acc;
    int count = 0;
    for (const auto& token : tokens) {
        if (stoplist.contains(token)) continue;
        auto it = lexicon.scores.find(token);
        if (it == lexicon.scores.end()) continue;
        const Vec& v = it->second;
        if (count == 0) {
            acc = v;
        } else {
            switch (agg) {
                case Aggregator::mean:
                case Aggregator::sum: acc += v; break;
                case Aggregator::max: acc = acc.cwiseMax(v); break;
                case Aggregator::min: acc = acc.cwiseMin(v); break;
            }
        }
        ++count;
    }
    if (count == 0) return std::nullopt;
    if (agg == Aggregator::mean) acc /= static_cast<double>(count);
    return acc;
}

SentenceFeatures sentence_features(const std::vector<std::string>& tokens,
                                   const EmbeddingTable& table, const StopList* stoplist) {
    SentenceFeatures out;
    out.features = Vec::Zero(table.dim);
    int count = 0;
    for (const auto& token : tokens) {
        if (stoplist && stoplist->contains(token)) continue;
        auto it = table.vectors.find(token);
        if (it == table.vectors.end()) continue;
        out.features += it->second;
        ++count;
    }
    if (count > 0) {
        out.features /= static_cast<double>(count);
        out.any_found = true;
    }
    return out;
}

}  // namespace normfuse
