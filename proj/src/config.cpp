#include "foct/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace foct {

using nlohmann::json;

const char* to_string(Mode m) {
    switch (m) {
        case Mode::semi: return "semi";
        case Mode::supervised_only: return "supervised_only";
        case Mode::output_only_consistency: return "output_only_consistency";
        case Mode::no_aux_decoder: return "no_aux_decoder";
    }
    throw std::logic_error("to_string: bad Mode value");
}

Mode mode_from_string(const std::string& s) {
    if (s == "semi") return Mode::semi;
    if (s == "supervised_only") return Mode::supervised_only;
    if (s == "output_only_consistency") return Mode::output_only_consistency;
    if (s == "no_aux_decoder") return Mode::no_aux_decoder;
    throw std::invalid_argument(
        "mode: unknown value \"" + s +
        "\" (expected semi, supervised_only, output_only_consistency or no_aux_decoder)");
}

void TrainConfig::validate() const {
    // total_iters = 0 is allowed: train() then returns the initialized model.
    if (total_iters < 0) throw std::invalid_argument("config: total_iters < 0");
    if (batch_size < 1) throw std::invalid_argument("config: batch_size < 1");
    if (!(lr > 0)) throw std::invalid_argument("config: lr must be > 0");
    if (momentum < 0 || momentum >= 1)
        throw std::invalid_argument("config: momentum must be in [0, 1)");
    if (perturb_depth != kPerturbDepthAuto && perturb_depth < 1)
        throw std::invalid_argument("config: perturb.depth must be \"auto\" or >= 1");
    if (noise_bound < 0) throw std::invalid_argument("config: perturb.noise_bound < 0");
    if (eval_every < 0) throw std::invalid_argument("config: eval_every < 0");
    if (checkpoint_every < 0) throw std::invalid_argument("config: checkpoint_every < 0");
    weights.validate();
    if (model.in_channels < 1) throw std::invalid_argument("config: model.in_channels < 1");
    if (model.num_classes < 2) throw std::invalid_argument("config: model.num_classes < 2");
    if (model.base_width < 1) throw std::invalid_argument("config: model.base_width < 1");
    if (model.depth < 1) throw std::invalid_argument("config: model.depth < 1");
    if (model.double_until < 1 || model.double_until > model.depth)
        throw std::invalid_argument("config: model.double_until must be in [1, model.depth]");
    if (perturb_depth != kPerturbDepthAuto && perturb_depth > model.depth)
        throw std::invalid_argument("config: perturb.depth exceeds model.depth");
}

namespace {

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& scope) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) { ok = true; break; }
        if (!ok)
            throw std::invalid_argument("config: unknown key \"" + scope + key + "\"");
    }
}

template <typename T>
void read_field(const json& obj, const char* key, const std::string& scope, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw std::invalid_argument("config: bad value for \"" + scope + key + "\": " + e.what());
    }
}

}  // namespace

TrainConfig train_config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: JSON parse error: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config: top level must be a JSON object");

    reject_unknown_keys(j,
                        {"total_iters", "batch_size", "lr", "momentum", "seed", "eval_every",
                         "checkpoint_every", "mode", "perturb", "loss", "model"},
                        "");

    TrainConfig cfg;
    read_field(j, "total_iters", "", cfg.total_iters);
    read_field(j, "batch_size", "", cfg.batch_size);
    read_field(j, "lr", "", cfg.lr);
    read_field(j, "momentum", "", cfg.momentum);
    read_field(j, "seed", "", cfg.seed);
    read_field(j, "eval_every", "", cfg.eval_every);
    read_field(j, "checkpoint_every", "", cfg.checkpoint_every);
    if (j.contains("mode")) {
        std::string m;
        read_field(j, "mode", "", m);
        cfg.mode = mode_from_string(m);
    }

    if (j.contains("perturb")) {
        const json& p = j.at("perturb");
        if (!p.is_object()) throw std::invalid_argument("config: \"perturb\" must be an object");
        reject_unknown_keys(p, {"depth", "noise_bound"}, "perturb.");
        if (p.contains("depth")) {
            const json& d = p.at("depth");
            if (d.is_string()) {
                if (d.get<std::string>() != "auto")
                    throw std::invalid_argument(
                        "config: perturb.depth must be \"auto\" or an integer");
                cfg.perturb_depth = kPerturbDepthAuto;
            } else {
                read_field(p, "depth", "perturb.", cfg.perturb_depth);
            }
        }
        read_field(p, "noise_bound", "perturb.", cfg.noise_bound);
    }

    if (j.contains("loss")) {
        const json& l = j.at("loss");
        if (!l.is_object()) throw std::invalid_argument("config: \"loss\" must be an object");
        reject_unknown_keys(
            l, {"alpha", "omega_u", "ramp_frac", "anneal_frac", "eta_start", "eta_end"}, "loss.");
        read_field(l, "alpha", "loss.", cfg.weights.alpha);
        read_field(l, "omega_u", "loss.", cfg.weights.omega_u);
        read_field(l, "ramp_frac", "loss.", cfg.weights.ramp_frac);
        read_field(l, "anneal_frac", "loss.", cfg.weights.anneal_frac);
        read_field(l, "eta_start", "loss.", cfg.weights.eta_start);
        read_field(l, "eta_end", "loss.", cfg.weights.eta_end);
    }

    if (j.contains("model")) {
        const json& m = j.at("model");
        if (!m.is_object()) throw std::invalid_argument("config: \"model\" must be an object");
        reject_unknown_keys(m,
                            {"in_channels", "num_classes", "base_width", "depth", "double_until",
                             "skip_connections"},
                            "model.");
        read_field(m, "in_channels", "model.", cfg.model.in_channels);
        read_field(m, "num_classes", "model.", cfg.model.num_classes);
        read_field(m, "base_width", "model.", cfg.model.base_width);
        read_field(m, "depth", "model.", cfg.model.depth);
        read_field(m, "double_until", "model.", cfg.model.double_until);
        read_field(m, "skip_connections", "model.", cfg.model.skip_connections);
    }

    cfg.validate();
    return cfg;
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return train_config_from_json_text(buf.str());
}

std::string train_config_to_json_text(const TrainConfig& cfg) {
    json j;
    j["total_iters"] = cfg.total_iters;
    j["batch_size"] = cfg.batch_size;
    j["lr"] = cfg.lr;
    j["momentum"] = cfg.momentum;
    j["seed"] = cfg.seed;
    j["eval_every"] = cfg.eval_every;
    j["checkpoint_every"] = cfg.checkpoint_every;
    j["mode"] = to_string(cfg.mode);
    if (cfg.perturb_depth == kPerturbDepthAuto)
        j["perturb"]["depth"] = "auto";
    else
        j["perturb"]["depth"] = cfg.perturb_depth;
    j["perturb"]["noise_bound"] = cfg.noise_bound;
    j["loss"]["alpha"] = cfg.weights.alpha;
    j["loss"]["omega_u"] = cfg.weights.omega_u;
    j["loss"]["ramp_frac"] = cfg.weights.ramp_frac;
    j["loss"]["anneal_frac"] = cfg.weights.anneal_frac;
    j["loss"]["eta_start"] = cfg.weights.eta_start;
    j["loss"]["eta_end"] = cfg.weights.eta_end;
    j["model"]["in_channels"] = cfg.model.in_channels;
    j["model"]["num_classes"] = cfg.model.num_classes;
    j["model"]["base_width"] = cfg.model.base_width;
    j["model"]["depth"] = cfg.model.depth;
    j["model"]["double_until"] = cfg.model.double_until;
    j["model"]["skip_connections"] = cfg.model.skip_connections;
    return j.dump(2);
}

std::string config_digest(const TrainConfig& cfg) {
    const std::string text = train_config_to_json_text(cfg);
    // FNV-1a, 64-bit.
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace foct
