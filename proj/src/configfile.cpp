#include "senet/configfile.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "senet/error.hpp"

namespace senet {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

}  // namespace

KvMap parse_kv_text(const std::string& text) {
    KvMap kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("config line " + std::to_string(lineno) + ": missing '='");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ParseError("config line " + std::to_string(lineno) + ": empty key");
        kv[key] = value;
    }
    return kv;
}

KvMap load_kv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_kv_text(ss.str());
}

std::string kv_to_text(const KvMap& kv) {
    std::ostringstream out;
    for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
    return out.str();
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw ParseError("trailing characters in number '" + s + "'");
        return v;
    } catch (const ParseError&) {
        throw;
    } catch (...) {
        throw ParseError("not a number: '" + s + "'");
    }
}

std::int64_t parse_int(const std::string& s) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(s, &used);
        if (used != s.size()) throw ParseError("trailing characters in integer '" + s + "'");
        return v;
    } catch (const ParseError&) {
        throw;
    } catch (...) {
        throw ParseError("not an integer: '" + s + "'");
    }
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ParseError("not a boolean: '" + s + "'");
}

KvMap model_config_kv(const ModelConfig& cfg) {
    KvMap kv;
    kv["model.img_size"] = std::to_string(cfg.img_size);
    kv["model.patch"] = std::to_string(cfg.patch);
    kv["model.enc_dim"] = std::to_string(cfg.enc_dim);
    kv["model.enc_depth"] = std::to_string(cfg.enc_depth);
    kv["model.enc_heads"] = std::to_string(cfg.enc_heads);
    kv["model.dec_dim"] = std::to_string(cfg.dec_dim);
    kv["model.dec_depth"] = std::to_string(cfg.dec_depth);
    kv["model.dec_heads"] = std::to_string(cfg.dec_heads);
    kv["model.licm_channels"] = std::to_string(cfg.licm_channels);
    kv["model.head_channels"] = std::to_string(cfg.head_channels);
    kv["model.licm_enabled"] = cfg.licm_enabled ? "true" : "false";
    kv["model.seed"] = std::to_string(cfg.seed);
    return kv;
}

ModelConfig model_config_from_kv(const KvMap& kv) {
    ModelConfig cfg;
    auto want = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw ParseError(std::string("missing config key ") + key);
        return it->second;
    };
    cfg.img_size = parse_int(want("model.img_size"));
    cfg.patch = parse_int(want("model.patch"));
    cfg.enc_dim = parse_int(want("model.enc_dim"));
    cfg.enc_depth = parse_int(want("model.enc_depth"));
    cfg.enc_heads = parse_int(want("model.enc_heads"));
    cfg.dec_dim = parse_int(want("model.dec_dim"));
    cfg.dec_depth = parse_int(want("model.dec_depth"));
    cfg.dec_heads = parse_int(want("model.dec_heads"));
    cfg.licm_channels = parse_int(want("model.licm_channels"));
    cfg.head_channels = parse_int(want("model.head_channels"));
    cfg.licm_enabled = parse_bool(want("model.licm_enabled"));
    cfg.seed = std::uint64_t(parse_int(want("model.seed")));
    return cfg;
}

KvMap loss_config_kv(const LossConfig& cfg) {
    KvMap kv;
    kv["loss.lambda"] = format_double(cfg.lambda);
    kv["loss.l"] = format_double(cfg.l);
    kv["loss.band_lo"] = format_double(cfg.band_lo);
    kv["loss.band_hi"] = format_double(cfg.band_hi);
    kv["loss.band_dilation"] = std::to_string(cfg.band_dilation);
    kv["loss.bce_clamp_eps"] = format_double(cfg.bce_clamp_eps);
    kv["loss.iou_smooth"] = format_double(cfg.iou_smooth);
    kv["loss.alpha_cap"] = format_double(cfg.alpha_cap);
    kv["loss.gt_resize"] = cfg.gt_resize == ResizeMode::Bilinear ? "bilinear" : "nearest";
    kv["loss.weighting"] = cfg.weighting == Weighting::Dw ? "dw" : (cfg.weighting == Weighting::None ? "none" : "ppa");
    return kv;
}

LossConfig loss_config_from_kv(const KvMap& kv) {
    LossConfig cfg;
    auto maybe = [&](const char* key, auto setter) {
        auto it = kv.find(key);
        if (it != kv.end()) setter(it->second);
    };
    maybe("loss.lambda", [&](const std::string& v) { cfg.lambda = parse_double(v); });
    maybe("loss.l", [&](const std::string& v) { cfg.l = parse_double(v); });
    maybe("loss.band_lo", [&](const std::string& v) { cfg.band_lo = parse_double(v); });
    maybe("loss.band_hi", [&](const std::string& v) { cfg.band_hi = parse_double(v); });
    maybe("loss.band_dilation", [&](const std::string& v) { cfg.band_dilation = int(parse_int(v)); });
    maybe("loss.bce_clamp_eps", [&](const std::string& v) { cfg.bce_clamp_eps = parse_double(v); });
    maybe("loss.iou_smooth", [&](const std::string& v) { cfg.iou_smooth = parse_double(v); });
    maybe("loss.alpha_cap", [&](const std::string& v) { cfg.alpha_cap = parse_double(v); });
    maybe("loss.gt_resize", [&](const std::string& v) {
        if (v == "bilinear")
            cfg.gt_resize = ResizeMode::Bilinear;
        else if (v == "nearest")
            cfg.gt_resize = ResizeMode::Nearest;
        else
            throw ParseError("loss.gt_resize must be bilinear|nearest");
    });
    maybe("loss.weighting", [&](const std::string& v) {
        if (v == "dw")
            cfg.weighting = Weighting::Dw;
        else if (v == "none")
            cfg.weighting = Weighting::None;
        else if (v == "ppa")
            cfg.weighting = Weighting::Ppa;
        else
            throw ParseError("loss.weighting must be dw|none|ppa");
    });
    cfg.validate();
    return cfg;
}

}  // namespace senet
