#pragma once
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "cfcml/dataset.hpp"
#include "cfcml/mat.hpp"
#include "cfcml/rng.hpp"
#include "cfcml/templates.hpp"

namespace cfcml::encoders {

inline constexpr int kEmbedDim = 512;

// Frozen sentence embedder: one 512-dim row per sentence, never updated and
// never receiving gradients.
class TabularEmbedder {
public:
    virtual ~TabularEmbedder() = default;
    virtual std::vector<double> embed(const std::string& sentence) const = 0;
    int dim() const { return kEmbedDim; }
};

// Deterministic token-hash bag of words, L2-normalized. Tokens are maximal
// alphanumeric runs, lowercased; each token adds +/-1 at an FNV-1a-derived
// coordinate (sign from bit 9 of the hash).
class HashEmbedder final : public TabularEmbedder {
public:
    std::vector<double> embed(const std::string& sentence) const override {
        std::vector<double> v(kEmbedDim, 0.0);
        std::string token;
        auto flush = [&]() {
            if (token.empty()) return;
            std::uint64_t h = fnv1a64(token);
            const int idx = static_cast<int>(h % kEmbedDim);
            const double sign = ((h >> 9) & 1ULL) ? 1.0 : -1.0;
            v[idx] += sign;
            token.clear();
        };
        for (unsigned char c : sentence) {
            if (std::isalnum(c)) token += static_cast<char>(std::tolower(c));
            else flush();
        }
        flush();
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm > 0.0)
            for (double& x : v) x /= norm;
        return v;
    }
};

// Table of sentence -> vector loaded from disk; lines are
//   sentence<TAB>512 space-separated floats
// Lets embeddings produced offline by a real text encoder be injected.
class PrecomputedEmbedder final : public TabularEmbedder {
public:
    explicit PrecomputedEmbedder(const std::filesystem::path& path) {
        std::ifstream is(path);
        if (!is) throw IoError("cannot open embedding table: " + path.string());
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            if (line.empty()) continue;
            std::size_t tab = line.find('\t');
            if (tab == std::string::npos)
                throw CorruptBlob(path.string() + ":" + std::to_string(lineno) +
                                  ": expected sentence<TAB>floats");
            std::vector<double> v;
            v.reserve(kEmbedDim);
            std::istringstream rest(line.substr(tab + 1));
            double x;
            while (rest >> x) v.push_back(x);
            if (static_cast<int>(v.size()) != kEmbedDim)
                throw CorruptBlob(path.string() + ":" + std::to_string(lineno) + ": expected " +
                                  std::to_string(kEmbedDim) + " floats, got " +
                                  std::to_string(v.size()));
            table_[line.substr(0, tab)] = std::move(v);
        }
    }

    std::vector<double> embed(const std::string& sentence) const override {
        auto it = table_.find(sentence);
        if (it == table_.end())
            throw UnknownAttribute("no precomputed embedding for sentence: '" + sentence + "'");
        return it->second;
    }

private:
    std::map<std::string, std::vector<double>> table_;
};

// Row i is the embedding of the i-th attribute's rendered sentence.
inline Mat embed_tabular(const dataio::TabularRecord& record, const dataio::TemplateTable& templates,
                         const TabularEmbedder& embedder) {
    record.validate();
    Mat out(record.count(), kEmbedDim);
    for (int i = 0; i < record.count(); ++i) {
        const auto& [name, value] = record.attributes[static_cast<std::size_t>(i)];
        std::vector<double> v = embedder.embed(templates.render(name, value));
        for (int j = 0; j < kEmbedDim; ++j) out(i, j) = v[static_cast<std::size_t>(j)];
    }
    return out;
}

}  // namespace cfcml::encoders
