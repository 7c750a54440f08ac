#pragma once

#include <unistd.h>

#include <array>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "kgbias/embedding.hpp"
#include "kgbias/kg.hpp"

namespace helpers {

// Scratch directory wiped on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("kgbias_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

inline kgbias::KnowledgeGraph graph_from(
    const std::vector<std::array<std::string, 3>>& triples) {
    std::vector<kgbias::RawTriple> raw;
    for (const auto& [h, r, t] : triples) raw.push_back(kgbias::RawTriple{h, r, t});
    return kgbias::build_graph(raw);
}

// Embedding set with explicitly placed vectors; relation vectors default to
// zero and can be set afterwards.
inline kgbias::EmbeddingSet manual_embedding(
    kgbias::ScoreModel model, int dim, const std::vector<std::string>& entities,
    const std::vector<std::string>& relations,
    const std::vector<std::vector<double>>& entity_vecs,
    const std::vector<std::vector<double>>& relation_vecs) {
    kgbias::EmbeddingSet emb(model, dim, entities, relations);
    for (std::size_t i = 0; i < entity_vecs.size(); ++i) {
        auto row = emb.entity_mut(static_cast<kgbias::EntityId>(i));
        std::copy(entity_vecs[i].begin(), entity_vecs[i].end(), row.begin());
    }
    for (std::size_t i = 0; i < relation_vecs.size(); ++i) {
        auto row = emb.relation_mut(static_cast<kgbias::RelationId>(i));
        std::copy(relation_vecs[i].begin(), relation_vecs[i].end(), row.begin());
    }
    return emb;
}

}  // namespace helpers
