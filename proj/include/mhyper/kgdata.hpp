#pragma once

// Triple and modality-feature ingestion: vocabularies, inverse-relation
// augmentation, the filtered-evaluation index, MHFT feature files, and the
// corruption modes used by the robustness experiments.

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mhyper/stats.hpp"

namespace mhyper {

struct Triple {
    std::int32_t h = 0;
    std::int32_t r = 0;
    std::int32_t t = 0;
    bool operator==(const Triple&) const = default;
};

struct Vocab {
    std::vector<std::string> names;
    std::unordered_map<std::string, std::int32_t> ids;

    std::int32_t intern(const std::string& name) {
        auto it = ids.find(name);
        if (it != ids.end()) return it->second;
        std::int32_t id = static_cast<std::int32_t>(names.size());
        names.push_back(name);
        ids.emplace(name, id);
        return id;
    }
    std::optional<std::int32_t> lookup(const std::string& name) const {
        auto it = ids.find(name);
        if (it == ids.end()) return std::nullopt;
        return it->second;
    }
    std::size_t size() const { return names.size(); }
};

// Entity/relation vocabularies plus the three splits. The relation vocabulary
// lists the original relations first, then their inverses:
// id(r^-1) = id(r) + n_original_relations. The train list holds the original
// triples followed by their materialized inverses (t, r^-1, h); valid/test
// keep the original direction only.
struct KnowledgeGraph {
    Vocab entities;
    Vocab relations; // inverses included
    std::int32_t n_original_relations = 0;
    std::vector<Triple> train; // originals block, then inverses block
    std::vector<Triple> valid;
    std::vector<Triple> test;

    std::int32_t num_entities() const { return static_cast<std::int32_t>(entities.size()); }
    std::int32_t num_relations() const { return static_cast<std::int32_t>(relations.size()); }
    std::int32_t inverse_of(std::int32_t r) const {
        return r < n_original_relations ? r + n_original_relations
                                        : r - n_original_relations;
    }
    std::size_t n_original_train() const { return train.size() / 2; }
};

// Per-entity pooled feature rows for one modality. Rows with present=false
// are all-zero placeholders.
struct ModalityFeatures {
    MatF rows;                     // |E| x dim
    std::vector<std::uint8_t> present; // |E|
    int dim = 0;

    int num_present() const {
        int n = 0;
        for (auto p : present) n += p ? 1 : 0;
        return n;
    }
    std::vector<int> present_rows() const {
        std::vector<int> out;
        for (std::size_t i = 0; i < present.size(); ++i)
            if (present[i]) out.push_back(static_cast<int>(i));
        return out;
    }
};

KnowledgeGraph load_graph(const std::string& train_path,
                          const std::string& valid_path,
                          const std::string& test_path);

// Writes the original (non-inverse) triples of each split back to TSV.
void save_graph(const KnowledgeGraph& graph, const std::string& train_path,
                const std::string& valid_path, const std::string& test_path);

// MHFT binary feature file (little-endian):
//   magic "MHFT", u32 version=1, u32 row_count, u32 feature_dim,
//   per row: u32 key_len, key bytes, u32 vector_count,
//            vector_count * feature_dim f32 values.
// Multiple vectors per key are mean-pooled on load.
ModalityFeatures load_features(const std::string& path,
                               const KnowledgeGraph& graph,
                               const std::string& modality_tag);

void save_features(const std::string& path, const KnowledgeGraph& graph,
                   const ModalityFeatures& features);

// map (head, relation) -> sorted known-true tails over train u valid u test,
// both query directions.
struct FilterIndex {
    std::unordered_map<std::uint64_t, std::vector<std::int32_t>> known_tails;

    static std::uint64_t key(std::int32_t h, std::int32_t r) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(h)) << 32) |
               static_cast<std::uint32_t>(r);
    }
    const std::vector<std::int32_t>* find(std::int32_t h, std::int32_t r) const {
        auto it = known_tails.find(key(h, r));
        return it == known_tails.end() ? nullptr : &it->second;
    }
};

FilterIndex build_filter_index(const KnowledgeGraph& graph);

// Candidate mask over |E| for the query (h, r): known-true tails are
// excluded, except true_tail itself which is always kept.
std::vector<std::uint8_t> filtered_candidates(std::int32_t h, std::int32_t r,
                                              std::int32_t true_tail,
                                              const FilterIndex& index,
                                              std::int32_t num_entities);

enum class CorruptMode { ModalityMissing, ModalityNoise, LinkSparse };

CorruptMode parse_corrupt_mode(const std::string& name);

struct Dataset {
    KnowledgeGraph graph;
    ModalityFeatures visual;
    ModalityFeatures textual;
};

// Standard dataset directory layout:
//   train.tsv, valid.tsv, test.tsv, visual.mhft, textual.mhft
Dataset load_dataset(const std::string& dir);
void save_dataset(const Dataset& dataset, const std::string& dir);

// Seeded corruption for the robustness scenarios. ratio in [0, 1].
//   ModalityMissing: a ratio of each modality's present rows zeroed + masked.
//   ModalityNoise:   a ratio of present rows gets additive Gaussian noise with
//                    that modality's per-dimension mean/variance.
//   LinkSparse:      a ratio of the original training triples removed,
//                    inverses removed with them.
Dataset corrupt_dataset(const Dataset& input, CorruptMode mode, double ratio,
                        std::uint64_t seed);

} // namespace mhyper
