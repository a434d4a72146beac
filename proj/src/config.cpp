#include "mhyper/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "mhyper/errors.hpp"

namespace mhyper {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t");
    return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': not a number: " + value);
    }
}

int parse_int(const std::string& key, const std::string& value) {
    int v = 0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || p != value.data() + value.size()) {
        throw ConfigError("config key '" + key + "': not an integer: " + value);
    }
    return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || p != value.data() + value.size()) {
        throw ConfigError("config key '" + key + "': not an unsigned integer: " + value);
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw ConfigError("config key '" + key + "': expected true or false, got " + value);
}

} // namespace

TrainConfig parse_config_text(const std::string& text, const std::string& origin) {
    TrainConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected key = value");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        }

        if (key == "dataset") cfg.dataset_dir = value;
        else if (key == "out_dir") cfg.out_dir = value;
        else if (key == "learning_rate") cfg.learning_rate = parse_double(key, value);
        else if (key == "dim") cfg.dim = parse_int(key, value);
        else if (key == "lambda") cfg.lambda = parse_double(key, value);
        else if (key == "beta") cfg.beta = parse_double(key, value);
        else if (key == "batch_size") cfg.batch_size = parse_int(key, value);
        else if (key == "epochs") cfg.epochs = parse_int(key, value);
        else if (key == "eval_every") cfg.eval_every = parse_int(key, value);
        else if (key == "seed") cfg.seed = parse_u64(key, value);
        else if (key == "precision") cfg.precision = value;
        else if (key == "threads") cfg.threads = parse_int(key, value);
        else if (key == "weight_recon") cfg.weight_recon = parse_double(key, value);
        else if (key == "weight_distill") cfg.weight_distill = parse_double(key, value);
        else if (key == "weight_triple") cfg.weight_triple = parse_double(key, value);
        else if (key == "weight_reg") cfg.weight_reg = parse_double(key, value);
        else if (key == "grad_clip") cfg.grad_clip = parse_double(key, value);
        else if (key == "early_stop") cfg.early_stop = parse_bool(key, value);
        else if (key == "early_stop_patience") cfg.early_stop_patience = parse_int(key, value);
        else {
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": unknown config key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

TrainConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

std::map<std::string, std::string> config_snapshot(const TrainConfig& cfg) {
    auto num = [](double v) {
        std::ostringstream s;
        s << v;
        return s.str();
    };
    return {
        {"dataset", cfg.dataset_dir},
        {"out_dir", cfg.out_dir},
        {"learning_rate", num(cfg.learning_rate)},
        {"dim", std::to_string(cfg.dim)},
        {"lambda", num(cfg.lambda)},
        {"beta", num(cfg.beta)},
        {"batch_size", std::to_string(cfg.batch_size)},
        {"epochs", std::to_string(cfg.epochs)},
        {"eval_every", std::to_string(cfg.eval_every)},
        {"seed", std::to_string(cfg.seed)},
        {"precision", cfg.precision},
        {"threads", std::to_string(cfg.threads)},
        {"weight_recon", num(cfg.weight_recon)},
        {"weight_distill", num(cfg.weight_distill)},
        {"weight_triple", num(cfg.weight_triple)},
        {"weight_reg", num(cfg.weight_reg)},
        {"grad_clip", num(cfg.grad_clip)},
        {"early_stop", cfg.early_stop ? "true" : "false"},
        {"early_stop_patience", std::to_string(cfg.early_stop_patience)},
    };
}

} // namespace mhyper
