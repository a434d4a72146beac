#include "mhyper/kgdata.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "mhyper/errors.hpp"
#include "mhyper/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary file formats assume a little-endian host");

namespace mhyper {

namespace {

struct RawTriple {
    std::string h, r, t;
};

std::vector<RawTriple> parse_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open triple file: " + path);
    std::vector<RawTriple> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            throw DataError(path + ":" + std::to_string(lineno) + ": empty line");
        }
        auto tab1 = line.find('\t');
        auto tab2 = tab1 == std::string::npos ? std::string::npos
                                              : line.find('\t', tab1 + 1);
        if (tab1 == std::string::npos || tab2 == std::string::npos ||
            line.find('\t', tab2 + 1) != std::string::npos) {
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": expected head<TAB>relation<TAB>tail");
        }
        out.push_back(RawTriple{line.substr(0, tab1),
                                line.substr(tab1 + 1, tab2 - tab1 - 1),
                                line.substr(tab2 + 1)});
    }
    return out;
}

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::ifstream& in, const std::string& path) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
        throw DataError(path + ": truncated file");
    }
    return v;
}

// k distinct values from [0, n), ascending, seeded (partial Fisher-Yates).
std::vector<int> sample_without_replacement(int n, int k, Rng& rng) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int i = 0; i < k; ++i) {
        int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

int count_from_ratio(double ratio, int n) {
    return static_cast<int>(std::llround(ratio * n));
}

} // namespace

KnowledgeGraph load_graph(const std::string& train_path,
                          const std::string& valid_path,
                          const std::string& test_path) {
    KnowledgeGraph g;
    auto raw_train = parse_tsv(train_path);
    auto raw_valid = parse_tsv(valid_path);
    auto raw_test = parse_tsv(test_path);

    Vocab original_relations;
    auto intern = [&](const std::vector<RawTriple>& raw, std::vector<Triple>& out) {
        out.reserve(raw.size());
        for (const auto& rt : raw) {
            Triple t;
            t.h = g.entities.intern(rt.h);
            t.r = original_relations.intern(rt.r);
            t.t = g.entities.intern(rt.t);
            out.push_back(t);
        }
    };
    intern(raw_train, g.train);
    intern(raw_valid, g.valid);
    intern(raw_test, g.test);

    g.n_original_relations = static_cast<std::int32_t>(original_relations.size());
    g.relations = original_relations;
    for (const auto& name : original_relations.names) {
        g.relations.intern(name + "^-1");
    }

    const std::size_t n_orig = g.train.size();
    g.train.reserve(2 * n_orig);
    for (std::size_t i = 0; i < n_orig; ++i) {
        const Triple& t = g.train[i];
        g.train.push_back(Triple{t.t, g.inverse_of(t.r), t.h});
    }
    return g;
}

void save_graph(const KnowledgeGraph& graph, const std::string& train_path,
                const std::string& valid_path, const std::string& test_path) {
    auto write = [&](const std::string& path, const std::vector<Triple>& triples,
                     bool originals_only) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw DataError("cannot write " + path);
        for (const auto& t : triples) {
            if (originals_only && t.r >= graph.n_original_relations) continue;
            out << graph.entities.names[t.h] << '\t' << graph.relations.names[t.r]
                << '\t' << graph.entities.names[t.t] << '\n';
        }
    };
    write(train_path, graph.train, true);
    write(valid_path, graph.valid, false);
    write(test_path, graph.test, false);
}

ModalityFeatures load_features(const std::string& path,
                               const KnowledgeGraph& graph,
                               const std::string& modality_tag) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open feature file: " + path);

    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "MHFT", 4) != 0) {
        throw DataError(path + ": not an MHFT file");
    }
    const std::uint32_t version = read_u32(in, path);
    if (version != 1) {
        throw DataError(path + ": unsupported MHFT version " + std::to_string(version));
    }
    const std::uint32_t row_count = read_u32(in, path);
    const std::uint32_t dim = read_u32(in, path);
    if (dim == 0) throw DataError(path + ": feature dimension must be positive");

    const int n = graph.num_entities();
    ModalityFeatures f;
    f.dim = static_cast<int>(dim);
    f.rows = MatF::Zero(n, f.dim);
    f.present.assign(static_cast<std::size_t>(n), 0);
    std::vector<std::uint32_t> counts(static_cast<std::size_t>(n), 0);

    std::vector<float> vec(dim);
    for (std::uint32_t row = 0; row < row_count; ++row) {
        const std::uint32_t key_len = read_u32(in, path);
        std::string key(key_len, '\0');
        if (!in.read(key.data(), key_len)) throw DataError(path + ": truncated key");
        const std::uint32_t vec_count = read_u32(in, path);
        auto id = graph.entities.lookup(key);
        if (!id && vec_count > 0) {
            std::cerr << "warning: " << modality_tag << " features for unknown entity '"
                      << key << "' skipped\n";
        }
        for (std::uint32_t v = 0; v < vec_count; ++v) {
            if (!in.read(reinterpret_cast<char*>(vec.data()),
                         static_cast<std::streamsize>(sizeof(float) * dim))) {
                throw DataError(path + ": truncated vector data");
            }
            if (id) {
                for (std::uint32_t x = 0; x < dim; ++x) f.rows(*id, x) += vec[x];
                ++counts[static_cast<std::size_t>(*id)];
            }
        }
    }
    for (int e = 0; e < n; ++e) {
        if (counts[static_cast<std::size_t>(e)] > 0) {
            f.rows.row(e) /= static_cast<float>(counts[static_cast<std::size_t>(e)]);
            f.present[static_cast<std::size_t>(e)] = 1;
        }
    }
    return f;
}

void save_features(const std::string& path, const KnowledgeGraph& graph,
                   const ModalityFeatures& features) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out.write("MHFT", 4);
    write_u32(out, 1);
    write_u32(out, static_cast<std::uint32_t>(features.num_present()));
    write_u32(out, static_cast<std::uint32_t>(features.dim));
    for (int e = 0; e < graph.num_entities(); ++e) {
        if (!features.present[static_cast<std::size_t>(e)]) continue;
        const std::string& name = graph.entities.names[static_cast<std::size_t>(e)];
        write_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(out, 1);
        out.write(reinterpret_cast<const char*>(features.rows.row(e).data()),
                  static_cast<std::streamsize>(sizeof(float) * features.dim));
    }
}

FilterIndex build_filter_index(const KnowledgeGraph& graph) {
    FilterIndex index;
    auto add = [&](const Triple& t) {
        index.known_tails[FilterIndex::key(t.h, t.r)].push_back(t.t);
        index.known_tails[FilterIndex::key(t.t, graph.inverse_of(t.r))].push_back(t.h);
    };
    for (const auto& t : graph.train) add(t);
    for (const auto& t : graph.valid) add(t);
    for (const auto& t : graph.test) add(t);
    for (auto& [key, tails] : index.known_tails) {
        std::sort(tails.begin(), tails.end());
        tails.erase(std::unique(tails.begin(), tails.end()), tails.end());
    }
    return index;
}

std::vector<std::uint8_t> filtered_candidates(std::int32_t h, std::int32_t r,
                                              std::int32_t true_tail,
                                              const FilterIndex& index,
                                              std::int32_t num_entities) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(num_entities), 1);
    if (const auto* tails = index.find(h, r)) {
        for (std::int32_t t : *tails) mask[static_cast<std::size_t>(t)] = 0;
    }
    mask[static_cast<std::size_t>(true_tail)] = 1;
    return mask;
}

CorruptMode parse_corrupt_mode(const std::string& name) {
    if (name == "modality-missing") return CorruptMode::ModalityMissing;
    if (name == "modality-noise") return CorruptMode::ModalityNoise;
    if (name == "link-sparse") return CorruptMode::LinkSparse;
    throw ConfigError("unknown corruption mode: " + name);
}

Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    auto req = [&](const char* name) {
        fs::path p = fs::path(dir) / name;
        if (!fs::exists(p)) throw ConfigError("missing dataset file: " + p.string());
        return p.string();
    };
    Dataset d;
    d.graph = load_graph(req("train.tsv"), req("valid.tsv"), req("test.tsv"));
    d.visual = load_features(req("visual.mhft"), d.graph, "visual");
    d.textual = load_features(req("textual.mhft"), d.graph, "textual");
    return d;
}

void save_dataset(const Dataset& dataset, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto p = [&](const char* name) { return (fs::path(dir) / name).string(); };
    save_graph(dataset.graph, p("train.tsv"), p("valid.tsv"), p("test.tsv"));
    save_features(p("visual.mhft"), dataset.graph, dataset.visual);
    save_features(p("textual.mhft"), dataset.graph, dataset.textual);
}

Dataset corrupt_dataset(const Dataset& input, CorruptMode mode, double ratio,
                        std::uint64_t seed) {
    if (ratio < 0.0 || ratio > 1.0) {
        throw ConfigError("corruption ratio must be in [0, 1]");
    }
    Dataset out = input;

    auto corrupt_modality = [&](ModalityFeatures& f, const char* tag) {
        auto present = f.present_rows();
        const int k = count_from_ratio(ratio, static_cast<int>(present.size()));
        Rng rng = Rng::stream(seed, "corruption", Rng::mix(0, tag));
        auto chosen = sample_without_replacement(static_cast<int>(present.size()), k, rng);
        if (mode == CorruptMode::ModalityMissing) {
            for (int c : chosen) {
                f.rows.row(present[static_cast<std::size_t>(c)]).setZero();
                f.present[static_cast<std::size_t>(present[static_cast<std::size_t>(c)])] = 0;
            }
        } else {
            Vec<float> mean, var;
            auto rows = f.present_rows();
            column_stats(f.rows, &rows, mean, var);
            for (int c : chosen) {
                const int row = present[static_cast<std::size_t>(c)];
                for (int x = 0; x < f.dim; ++x) {
                    f.rows(row, x) += mean(x) + std::sqrt(var(x)) *
                                                    static_cast<float>(rng.gaussian());
                }
            }
        }
    };

    switch (mode) {
        case CorruptMode::ModalityMissing:
        case CorruptMode::ModalityNoise:
            corrupt_modality(out.visual, "visual");
            corrupt_modality(out.textual, "textual");
            break;
        case CorruptMode::LinkSparse: {
            const int n_orig = static_cast<int>(input.graph.n_original_train());
            const int k = count_from_ratio(ratio, n_orig);
            Rng rng = Rng::stream(seed, "corruption", Rng::mix(0, "links"));
            auto removed = sample_without_replacement(n_orig, k, rng);
            std::vector<std::uint8_t> drop(static_cast<std::size_t>(n_orig), 0);
            for (int i : removed) drop[static_cast<std::size_t>(i)] = 1;
            std::vector<Triple> kept;
            kept.reserve(2 * (static_cast<std::size_t>(n_orig) - static_cast<std::size_t>(k)));
            for (int i = 0; i < n_orig; ++i) {
                if (!drop[static_cast<std::size_t>(i)]) kept.push_back(input.graph.train[static_cast<std::size_t>(i)]);
            }
            const std::size_t survivors = kept.size();
            for (std::size_t i = 0; i < survivors; ++i) {
                const Triple& t = kept[i];
                kept.push_back(Triple{t.t, input.graph.inverse_of(t.r), t.h});
            }
            out.graph.train = std::move(kept);
            break;
        }
    }
    return out;
}

} // namespace mhyper
