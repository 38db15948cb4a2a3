#include "fedlex/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <json.hpp>

#include "fedlex/error.hpp"

namespace fedlex {

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) throw Error("format_double: conversion failed");
    return std::string(buf.data(), end);
}

namespace {

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
        throw ConfigError(key, "expected a number, got '" + text + "'");
    return v;
}

long long parse_int(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    long long v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw ConfigError(key, "expected an integer, got '" + text + "'");
    return v;
}

int parse_int32(const std::string& key, const std::string& text) {
    const long long v = parse_int(key, text);
    if (v < -2147483648LL || v > 2147483647LL) throw ConfigError(key, "integer out of range");
    return static_cast<int>(v);
}

std::size_t parse_size(const std::string& key, const std::string& text) {
    const long long v = parse_int(key, text);
    if (v < 0) throw ConfigError(key, "must be non-negative");
    return static_cast<std::size_t>(v);
}

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw ConfigError(key, "expected a non-negative integer, got '" + text + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw ConfigError(key, "expected true or false, got '" + text + "'");
}

std::vector<std::string> split_list(const std::string& text) {
    std::string t = trim(text);
    if (!t.empty() && t.front() == '[' && t.back() == ']') t = t.substr(1, t.size() - 2);
    std::vector<std::string> out;
    std::stringstream ss(t);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
    return out;
}

template <typename E>
E parse_enum(const std::string& key, const std::string& text, std::initializer_list<std::pair<const char*, E>> options) {
    const std::string t = trim(text);
    std::string names;
    for (const auto& [name, value] : options) {
        if (t == name) return value;
        names += (names.empty() ? "" : ", ") + std::string(name);
    }
    throw ConfigError(key, "expected one of " + names + "; got '" + text + "'");
}

struct Field {
    const char* name;
    const char* alias;
    std::function<void(RoundConfig&, const std::string&)> set;
    std::function<std::string(const RoundConfig&)> get;
};

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        f.push_back({"rounds", "R", [](RoundConfig& c, const std::string& v) { c.rounds = parse_int32("rounds", v); },
                     [](const RoundConfig& c) { return std::to_string(c.rounds); }});
        f.push_back({"batch_size", "B",
                     [](RoundConfig& c, const std::string& v) { c.batch_size = parse_size("batch_size", v); },
                     [](const RoundConfig& c) { return std::to_string(c.batch_size); }});
        f.push_back({"local_epochs", "E",
                     [](RoundConfig& c, const std::string& v) { c.local_epochs = parse_int32("local_epochs", v); },
                     [](const RoundConfig& c) { return std::to_string(c.local_epochs); }});
        f.push_back({"clients", "C", [](RoundConfig& c, const std::string& v) { c.clients = parse_int32("clients", v); },
                     [](const RoundConfig& c) { return std::to_string(c.clients); }});
        f.push_back({"clients_per_round", "K",
                     [](RoundConfig& c, const std::string& v) {
                         c.clients_per_round = parse_int32("clients_per_round", v);
                     },
                     [](const RoundConfig& c) { return std::to_string(c.clients_per_round); }});
        f.push_back({"explorers", "C_exp",
                     [](RoundConfig& c, const std::string& v) { c.explorers = ExplorerSpec::parse(v); },
                     [](const RoundConfig& c) { return c.explorers.to_string(); }});
        f.push_back({"exploration_epochs", "E_exp",
                     [](RoundConfig& c, const std::string& v) {
                         c.exploration_epochs = parse_int32("exploration_epochs", v);
                     },
                     [](const RoundConfig& c) { return std::to_string(c.exploration_epochs); }});
        f.push_back({"learning_rate", "eta",
                     [](RoundConfig& c, const std::string& v) { c.learning_rate = parse_double("learning_rate", v); },
                     [](const RoundConfig& c) { return format_double(c.learning_rate); }});
        f.push_back({"weight_decay", nullptr,
                     [](RoundConfig& c, const std::string& v) { c.weight_decay = parse_double("weight_decay", v); },
                     [](const RoundConfig& c) { return format_double(c.weight_decay); }});
        f.push_back({"seed", nullptr, [](RoundConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); },
                     [](const RoundConfig& c) { return std::to_string(c.seed); }});
        f.push_back({"early_stop", nullptr,
                     [](RoundConfig& c, const std::string& v) { c.early_stop = parse_bool("early_stop", v); },
                     [](const RoundConfig& c) { return std::string(c.early_stop ? "true" : "false"); }});
        f.push_back({"aggregator", nullptr,
                     [](RoundConfig& c, const std::string& v) { c.aggregator = parse_aggregator(trim(v)); },
                     [](const RoundConfig& c) { return std::string(to_string(c.aggregator)); }});
        f.push_back({"fedlex", nullptr, [](RoundConfig& c, const std::string& v) { c.fedlex = parse_bool("fedlex", v); },
                     [](const RoundConfig& c) { return std::string(c.fedlex ? "true" : "false"); }});
        f.push_back({"server_lr", nullptr,
                     [](RoundConfig& c, const std::string& v) {
                         if (trim(v) == "auto")
                             c.server_lr.reset();
                         else
                             c.server_lr = parse_double("server_lr", v);
                     },
                     [](const RoundConfig& c) { return c.server_lr ? format_double(*c.server_lr) : "auto"; }});
        f.push_back({"momentum", nullptr,
                     [](RoundConfig& c, const std::string& v) { c.momentum = parse_double("momentum", v); },
                     [](const RoundConfig& c) { return format_double(c.momentum); }});
        f.push_back({"adam_beta1", nullptr,
                     [](RoundConfig& c, const std::string& v) { c.adam_beta1 = parse_double("adam_beta1", v); },
                     [](const RoundConfig& c) { return format_double(c.adam_beta1); }});
        f.push_back({"adam_beta2", nullptr,
                     [](RoundConfig& c, const std::string& v) { c.adam_beta2 = parse_double("adam_beta2", v); },
                     [](const RoundConfig& c) { return format_double(c.adam_beta2); }});
        f.push_back({"adam_eps", nullptr,
                     [](RoundConfig& c, const std::string& v) { c.adam_eps = parse_double("adam_eps", v); },
                     [](const RoundConfig& c) { return format_double(c.adam_eps); }});
        f.push_back({"prox_mu", "mu", [](RoundConfig& c, const std::string& v) { c.prox_mu = parse_double("prox_mu", v); },
                     [](const RoundConfig& c) { return format_double(c.prox_mu); }});
        f.push_back({"guidance_floor", nullptr,
                     [](RoundConfig& c, const std::string& v) { c.guidance_floor = parse_double("guidance_floor", v); },
                     [](const RoundConfig& c) { return format_double(c.guidance_floor); }});
        f.push_back({"per_layer_norm", nullptr,
                     [](RoundConfig& c, const std::string& v) { c.per_layer_norm = parse_bool("per_layer_norm", v); },
                     [](const RoundConfig& c) { return std::string(c.per_layer_norm ? "true" : "false"); }});
        f.push_back({"delta_mode", nullptr,
                     [](RoundConfig& c, const std::string& v) {
                         c.delta_mode = parse_enum<DeltaMode>("delta_mode", v,
                                                              {{"per_step", DeltaMode::PerStep}, {"once", DeltaMode::Once}});
                     },
                     [](const RoundConfig& c) {
                         return std::string(c.delta_mode == DeltaMode::PerStep ? "per_step" : "once");
                     }});
        f.push_back({"guidance_override", nullptr,
                     [](RoundConfig& c, const std::string& v) {
                         c.guidance_override = parse_enum<GuidanceOverride>(
                             "guidance_override", v, {{"none", GuidanceOverride::None}, {"ones", GuidanceOverride::Ones}});
                     },
                     [](const RoundConfig& c) {
                         return std::string(c.guidance_override == GuidanceOverride::None ? "none" : "ones");
                     }});
        f.push_back({"hidden", nullptr,
                     [](RoundConfig& c, const std::string& v) {
                         std::vector<std::size_t> h;
                         for (const auto& item : split_list(v)) h.push_back(parse_size("hidden", item));
                         c.hidden = std::move(h);
                     },
                     [](const RoundConfig& c) {
                         std::vector<std::string> items;
                         for (auto h : c.hidden) items.push_back(std::to_string(h));
                         return "[" + join(items) + "]";
                     }});
        f.push_back({"activation", nullptr,
                     [](RoundConfig& c, const std::string& v) { c.activation = parse_activation(trim(v)); },
                     [](const RoundConfig& c) { return std::string(to_string(c.activation)); }});
        f.push_back({"dataset", nullptr,
                     [](RoundConfig& c, const std::string& v) {
                         c.dataset = parse_enum<DataSource>("dataset", v,
                                                            {{"synthetic", DataSource::Synthetic}, {"idx", DataSource::Idx}});
                     },
                     [](const RoundConfig& c) {
                         return std::string(c.dataset == DataSource::Synthetic ? "synthetic" : "idx");
                     }});
        f.push_back({"classes", nullptr, [](RoundConfig& c, const std::string& v) { c.classes = parse_int32("classes", v); },
                     [](const RoundConfig& c) { return std::to_string(c.classes); }});
        f.push_back({"dim", nullptr, [](RoundConfig& c, const std::string& v) { c.dim = parse_size("dim", v); },
                     [](const RoundConfig& c) { return std::to_string(c.dim); }});
        f.push_back({"per_class", nullptr,
                     [](RoundConfig& c, const std::string& v) { c.per_class = parse_size("per_class", v); },
                     [](const RoundConfig& c) { return std::to_string(c.per_class); }});
        f.push_back({"separation", nullptr,
                     [](RoundConfig& c, const std::string& v) { c.separation = parse_double("separation", v); },
                     [](const RoundConfig& c) { return format_double(c.separation); }});
        f.push_back({"idx_images", nullptr, [](RoundConfig& c, const std::string& v) { c.idx_images = trim(v); },
                     [](const RoundConfig& c) { return c.idx_images; }});
        f.push_back({"idx_labels", nullptr, [](RoundConfig& c, const std::string& v) { c.idx_labels = trim(v); },
                     [](const RoundConfig& c) { return c.idx_labels; }});
        f.push_back({"partition", nullptr,
                     [](RoundConfig& c, const std::string& v) { c.partition = parse_partition_scheme(trim(v)); },
                     [](const RoundConfig& c) { return std::string(to_string(c.partition)); }});
        f.push_back({"classes_per_client", nullptr,
                     [](RoundConfig& c, const std::string& v) {
                         c.classes_per_client = parse_int32("classes_per_client", v);
                     },
                     [](const RoundConfig& c) { return std::to_string(c.classes_per_client); }});
        f.push_back({"alpha", nullptr, [](RoundConfig& c, const std::string& v) { c.alpha = parse_double("alpha", v); },
                     [](const RoundConfig& c) { return format_double(c.alpha); }});
        return f;
    }();
    return table;
}

const Field* find_field(const std::string& key) {
    for (const auto& f : fields())
        if (key == f.name || (f.alias && key == f.alias)) return &f;
    return nullptr;
}

void check(bool ok, const char* key, const std::string& message) {
    if (!ok) throw ConfigError(key, message);
}

}  // namespace

int ExplorerSpec::resolve(int clients) const {
    if (fraction) return std::max(1, static_cast<int>(std::lround(value * clients)));
    return static_cast<int>(value);
}

std::string ExplorerSpec::to_string() const {
    if (!fraction) return std::to_string(static_cast<long long>(value));
    std::string s = format_double(value);
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos) s += ".0";
    return s;
}

ExplorerSpec ExplorerSpec::parse(const std::string& text) {
    const std::string t = trim(text);
    ExplorerSpec spec;
    if (t.find_first_of(".eE") != std::string::npos) {
        spec.fraction = true;
        spec.value = parse_double("explorers", t);
        if (!(spec.value > 0.0 && spec.value <= 1.0))
            throw ConfigError("explorers", "a fractional explorer share must lie in (0, 1], got " + t);
    } else {
        spec.value = static_cast<double>(parse_int("explorers", t));
        if (spec.value < 1.0) throw ConfigError("explorers", "explorer count must be at least 1, got " + t);
    }
    return spec;
}

AggregatorHyper RoundConfig::hyper() const {
    AggregatorHyper h;
    h.server_lr = server_lr ? *server_lr : default_server_lr(aggregator, learning_rate);
    h.beta_momentum = momentum;
    h.beta1 = adam_beta1;
    h.beta2 = adam_beta2;
    h.adam_eps = adam_eps;
    h.prox_mu = prox_mu;
    return h;
}

std::string RoundConfig::variant_name() const { return fedlex::variant_name(aggregator, fedlex); }

void RoundConfig::validate() const {
    check(rounds >= 1, "rounds", "must be at least 1");
    check(batch_size >= 1, "batch_size", "must be at least 1");
    check(local_epochs >= 1, "local_epochs", "must be at least 1");
    check(clients >= 1, "clients", "must be at least 1");
    check(clients_per_round >= 1 && clients_per_round <= clients, "clients_per_round",
          "K=" + std::to_string(clients_per_round) + " violates 1 <= K <= C (C=" + std::to_string(clients) + ")");
    if (fedlex) {
        const int n = resolved_explorers();
        check(n >= 1 && n <= clients, "explorers",
              "resolves to " + std::to_string(n) + " explorers, outside [1, C=" + std::to_string(clients) + "]");
    }
    check(exploration_epochs >= 1, "exploration_epochs", "must be at least 1");
    check(learning_rate > 0.0, "learning_rate", "must be positive");
    check(weight_decay >= 0.0, "weight_decay", "must be non-negative");
    check(!server_lr || *server_lr > 0.0, "server_lr", "must be positive");
    check(momentum >= 0.0 && momentum < 1.0, "momentum", "must lie in [0, 1)");
    check(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam_beta1", "must lie in [0, 1)");
    check(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam_beta2", "must lie in [0, 1)");
    check(adam_eps > 0.0, "adam_eps", "must be positive");
    check(prox_mu >= 0.0, "prox_mu", "must be non-negative");
    check(guidance_floor >= 0.0 && guidance_floor < 1.0, "guidance_floor", "must lie in [0, 1)");
    for (auto h : hidden) check(h >= 1, "hidden", "layer sizes must be positive");
    if (dataset == DataSource::Synthetic) {
        check(classes >= 2, "classes", "must be at least 2");
        check(dim >= 1, "dim", "must be at least 1");
        check(per_class >= 10, "per_class", "must be at least 10");
        check(separation >= 0.0, "separation", "must be non-negative");
    } else {
        check(!idx_images.empty(), "idx_images", "required when dataset is idx");
        check(!idx_labels.empty(), "idx_labels", "required when dataset is idx");
    }
    check(classes_per_client >= 1, "classes_per_client", "must be at least 1");
    check(alpha > 0.0, "alpha", "must be positive");
}

std::string variant_name(AggregatorKind kind, bool fedlex) {
    std::string base;
    switch (kind) {
        case AggregatorKind::Avg: base = "Avg"; break;
        case AggregatorKind::AvgM: base = "AvgM"; break;
        case AggregatorKind::Sgd: base = "Sgd"; break;
        case AggregatorKind::Opt: base = "Opt"; break;
        case AggregatorKind::Prox: base = "Prox"; break;
    }
    return (fedlex ? "FedLEx" : "Fed") + base;
}

std::pair<AggregatorKind, bool> parse_variant(const std::string& name) {
    for (bool fedlex : {false, true})
        for (auto kind : {AggregatorKind::Avg, AggregatorKind::AvgM, AggregatorKind::Sgd, AggregatorKind::Opt,
                          AggregatorKind::Prox})
            if (variant_name(kind, fedlex) == name) return {kind, fedlex};
    throw ConfigError("variants", "unknown variant '" + name + "'");
}

void set_config_value(RoundConfig& cfg, const std::string& key, const std::string& value) {
    const Field* f = find_field(key);
    if (!f) throw ConfigError(key, "unknown key");
    f->set(cfg, value);
}

std::vector<std::pair<std::string, std::string>> to_key_values(const RoundConfig& cfg) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& f : fields()) out.emplace_back(f.name, f.get(cfg));
    return out;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.emplace_back(f.name);
    return out;
}

bool is_config_key(const std::string& key) { return find_field(key) != nullptr; }

std::string canonical_text(const RoundConfig& cfg) {
    std::string text;
    for (const auto& [k, v] : to_key_values(cfg)) text += k + ": " + v + "\n";
    return text;
}

std::string content_hash(const std::string& text) {
    const std::string blob = "blob " + std::to_string(text.size()) + std::string(1, '\0') + text;
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr) != 1)
        throw Error("content_hash: SHA-1 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

namespace {

void apply_entry(Campaign& c, const std::string& key, const std::string& value) {
    if (key == "variants") {
        c.variants = split_list(value);
        for (const auto& v : c.variants) parse_variant(v);
    } else if (key == "seeds") {
        c.seeds.clear();
        for (const auto& s : split_list(value)) c.seeds.push_back(parse_u64("seeds", s));
        if (c.seeds.empty()) throw ConfigError("seeds", "needs at least one seed");
    } else if (key == "output_dir") {
        c.output_dir = trim(value);
    } else if (key == "workers") {
        c.workers = parse_int32("workers", value);
    } else if (key.rfind("sweep.", 0) == 0) {
        const std::string target = key.substr(6);
        const Field* f = find_field(target);
        if (!f) throw ConfigError(key, "unknown sweep key");
        auto values = split_list(value);
        if (values.empty()) throw ConfigError(key, "sweep axis has no values");
        RoundConfig probe;
        for (const auto& v : values) f->set(probe, v);  // type-check every value up front
        c.sweeps.emplace_back(f->name, std::move(values));
    } else {
        set_config_value(c.base, key, value);
    }
}

std::string yaml_value_text(const std::string& key, const YAML::Node& node) {
    if (node.IsNull()) return "";
    if (node.IsScalar()) return node.Scalar();
    if (node.IsSequence()) {
        std::vector<std::string> items;
        for (const auto& item : node) {
            if (!item.IsScalar()) throw ConfigError(key, "list entries must be scalars");
            items.push_back(item.Scalar());
        }
        return "[" + join(items) + "]";
    }
    throw ConfigError(key, "nested maps are not supported; use flat keys");
}

}  // namespace

Campaign parse_config_text(const std::string& text) {
    Campaign c;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        nlohmann::json manifest;
        try {
            manifest = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("malformed manifest: ") + e.what());
        }
        if (!manifest.contains("config") || !manifest["config"].is_object())
            throw ConfigError("config", "manifest has no config object");
        for (const auto& [key, value] : manifest["config"].items()) {
            if (!value.is_string()) throw ConfigError(key, "manifest values must be strings");
            set_config_value(c.base, key, value.get<std::string>());
        }
        c.base.validate();
        return c;
    }

    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    if (root.IsNull()) {
        c.validate();
        return c;
    }
    if (!root.IsMap()) throw ConfigError("config must be a flat key: value document");
    for (const auto& entry : root) {
        const std::string key = entry.first.as<std::string>();
        apply_entry(c, key, yaml_value_text(key, entry.second));
    }
    c.validate();
    return c;
}

Campaign parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

}  // namespace fedlex
