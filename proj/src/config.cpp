#include "anoseg/config.hpp"

#include "anoseg/error.hpp"
#include "text_util.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <thread>
#include <vector>

namespace anoseg {

namespace {

using text::trim;

double to_double(std::string_view key, std::string_view v) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) {
        throw ConfigError("config key '" + std::string(key) + "': '" + std::string(v) + "' is not a number");
    }
    return out;
}

long long to_integer(std::string_view key, std::string_view v) {
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ConfigError("config key '" + std::string(key) + "': '" + std::string(v) + "' is not an integer");
    }
    return out;
}

int to_int(std::string_view key, std::string_view v) {
    const long long x = to_integer(key, v);
    if (x < -2147483647LL || x > 2147483647LL) throw ConfigError("config key '" + std::string(key) + "' is out of range");
    return static_cast<int>(x);
}

bool to_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + std::string(key) + "': expected true or false, got '" + std::string(v) + "'");
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string resolve_path(std::string_view v, const std::filesystem::path& base) {
    std::filesystem::path p{std::string(v)};
    if (p.is_relative() && !base.empty()) p = base / p;
    return p.lexically_normal().string();
}

struct Key {
    const char* name;
    std::function<void(PipelineConfig&, std::string_view, const std::filesystem::path&)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

template <class T>
Key real_key(const char* name, T PipelineConfig::*field) {
    return {name, [name, field](PipelineConfig& c, std::string_view v, const auto&) { c.*field = to_double(name, v); },
            [field](const PipelineConfig& c) { return num(c.*field); }};
}

Key int_key(const char* name, int PipelineConfig::*field) {
    return {name, [name, field](PipelineConfig& c, std::string_view v, const auto&) { c.*field = to_int(name, v); },
            [field](const PipelineConfig& c) { return std::to_string(c.*field); }};
}

Key seed_key(const char* name, std::uint64_t PipelineConfig::*field) {
    return {name,
            [name, field](PipelineConfig& c, std::string_view v, const auto&) {
                const long long x = to_integer(name, v);
                if (x < 0) throw ConfigError("config key '" + std::string(name) + "' must be non-negative");
                c.*field = static_cast<std::uint64_t>(x);
            },
            [field](const PipelineConfig& c) { return std::to_string(c.*field); }};
}

const std::vector<Key>& keys() {
    static const std::vector<Key> table = {
        {"profile", [](PipelineConfig& c, std::string_view v, const auto&) { c.profile = std::string(v); },
         [](const PipelineConfig& c) { return c.profile; }},
        real_key("sigma", &PipelineConfig::sigma),
        real_key("beta", &PipelineConfig::beta),
        {"reference_image",
         [](PipelineConfig& c, std::string_view v, const std::filesystem::path& base) {
             c.reference_image = v.empty() ? std::string() : resolve_path(v, base);
         },
         [](const PipelineConfig& c) { return c.reference_image; }},
        int_key("patch_size", &PipelineConfig::patch_size),
        real_key("noise_std", &PipelineConfig::noise_std),
        real_key("alpha1", &PipelineConfig::alpha1),
        real_key("alpha2", &PipelineConfig::alpha2),
        int_key("epochs", &PipelineConfig::epochs),
        int_key("batch_size", &PipelineConfig::batch_size),
        real_key("learning_rate", &PipelineConfig::learning_rate),
        int_key("max_patches", &PipelineConfig::max_patches),
        {"calibrate_bias", [](PipelineConfig& c, std::string_view v, const auto&) { c.calibrate_bias = to_bool("calibrate_bias", v); },
         [](const PipelineConfig& c) { return std::string(c.calibrate_bias ? "true" : "false"); }},
        {"feature_extractor",
         [](PipelineConfig& c, std::string_view v, const std::filesystem::path& base) {
             c.feature_extractor = (v == "builtin" || v == "identity") ? std::string(v) : resolve_path(v, base);
         },
         [](const PipelineConfig& c) { return c.feature_extractor; }},
        seed_key("feature_seed", &PipelineConfig::feature_seed),
        int_key("clusters", &PipelineConfig::clusters),
        {"min_area",
         [](PipelineConfig& c, std::string_view v, const auto&) {
             if (v == "auto") {
                 c.min_area = 0;
                 return;
             }
             c.min_area = to_int("min_area", v);
             if (c.min_area < 1) throw ConfigError("min_area must be 'auto' or at least 1");
         },
         [](const PipelineConfig& c) { return c.min_area == 0 ? std::string("auto") : std::to_string(c.min_area); }},
        int_key("opening_radius", &PipelineConfig::opening_radius),
        real_key("noise_ratio", &PipelineConfig::noise_ratio),
        int_key("kmeans_max_iter", &PipelineConfig::kmeans_max_iter),
        int_key("classifier_input", &PipelineConfig::classifier_input),
        int_key("classifier_epochs", &PipelineConfig::classifier_epochs),
        int_key("classifier_batch_size", &PipelineConfig::classifier_batch_size),
        real_key("classifier_learning_rate", &PipelineConfig::classifier_learning_rate),
        real_key("iou_threshold", &PipelineConfig::iou_threshold),
        seed_key("seed", &PipelineConfig::seed),
        int_key("workers", &PipelineConfig::workers),
    };
    return table;
}

void check(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

} // namespace

int profile_clusters(std::string_view profile) {
    if (profile == "sixray-like" || profile == "opixray-like") return 4;
    if (profile == "gdxray-like" || profile == "compass-like") return 3;
    throw ConfigError("unknown profile '" + std::string(profile) +
                      "' (expected sixray-like, opixray-like, gdxray-like or compass-like)");
}

void PipelineConfig::validate() const {
    profile_clusters(profile);
    check(sigma > 0.0, "sigma must be positive");
    check(beta > 0.0, "beta must be positive");
    check(patch_size >= 8 && patch_size % 8 == 0 && patch_size <= 4096, "patch_size must be a multiple of 8 in [8, 4096]");
    check(noise_std >= 0.0 && noise_std <= 1.0, "noise_std must lie in [0, 1]");
    check(alpha1 >= 0.0 && alpha2 >= 0.0 && alpha1 + alpha2 > 0.0, "alpha1 and alpha2 must be non-negative and not both zero");
    check(epochs >= 0 && epochs <= 100000, "epochs must lie in [0, 100000]");
    check(batch_size >= 1 && batch_size <= 4096, "batch_size must lie in [1, 4096]");
    check(learning_rate > 0.0 && learning_rate <= 1.0, "learning_rate must lie in (0, 1]");
    check(max_patches >= 1, "max_patches must be at least 1");
    check(!feature_extractor.empty(), "feature_extractor must be builtin, identity or a weights file");
    check(clusters >= 2 && clusters <= 64, "clusters must lie in [2, 64]");
    check(min_area >= 0, "min_area must be 'auto' or at least 1");
    check(opening_radius >= 0 && opening_radius <= 64, "opening_radius must lie in [0, 64]");
    check(noise_ratio >= 0.0, "noise_ratio must be non-negative");
    check(kmeans_max_iter >= 1, "kmeans_max_iter must be at least 1");
    check(classifier_input >= 8 && classifier_input % 8 == 0 && classifier_input <= 1024,
          "classifier_input must be a multiple of 8 in [8, 1024]");
    check(classifier_epochs >= 0 && classifier_epochs <= 100000, "classifier_epochs must lie in [0, 100000]");
    check(classifier_batch_size >= 1, "classifier_batch_size must be at least 1");
    check(classifier_learning_rate > 0.0 && classifier_learning_rate <= 1.0, "classifier_learning_rate must lie in (0, 1]");
    check(iou_threshold > 0.0 && iou_threshold <= 1.0, "iou_threshold must lie in (0, 1]");
    check(workers >= 0 && workers <= 1024, "workers must lie in [0, 1024]");
}

nn::ReconstructorConfig PipelineConfig::reconstructor() const {
    nn::ReconstructorConfig r;
    r.patch_size = patch_size;
    r.noise_std = noise_std;
    r.epochs = epochs;
    r.batch_size = batch_size;
    r.learning_rate = learning_rate;
    r.weights = {alpha1, alpha2};
    r.seed = seed;
    r.calibrate_bias = calibrate_bias;
    return r;
}

nn::ClassifierConfig PipelineConfig::classifier() const {
    nn::ClassifierConfig c;
    c.input_size = classifier_input;
    c.epochs = classifier_epochs;
    c.batch_size = classifier_batch_size;
    c.learning_rate = classifier_learning_rate;
    c.seed = seed;
    return c;
}

SegmenterConfig PipelineConfig::segmenter() const {
    SegmenterConfig s;
    s.clusters = clusters;
    s.min_area = min_area;
    s.opening_radius = opening_radius;
    s.max_iter = kmeans_max_iter;
    s.noise_ratio = noise_ratio;
    s.seed = seed;
    return s;
}

StyleSettings PipelineConfig::style(bool fda) const {
    StyleSettings s;
    s.method = fda ? StyleMethod::Fda : StyleMethod::Gwfs;
    s.sigma = sigma;
    s.beta = beta;
    return s;
}

nn::FeatureExtractor PipelineConfig::make_feature_extractor() const {
    if (feature_extractor == "builtin") return nn::FeatureExtractor::builtin(3, feature_seed);
    if (feature_extractor == "identity") return nn::FeatureExtractor::identity();
    return nn::FeatureExtractor::from_file(feature_extractor);
}

int PipelineConfig::resolved_workers() const {
    if (workers > 0) return workers;
    return static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
}

PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
    PipelineConfig cfg;
    std::set<std::string, std::less<>> seen;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view value = trim(line.substr(eq + 1));
        const auto it = std::ranges::find_if(keys(), [&](const Key& k) { return key == k.name; });
        if (it == keys().end()) throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
        if (!seen.insert(std::string(key)).second) {
            throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + std::string(key) + "'");
        }
        if (value.empty() && key != "reference_image") {
            throw ConfigError("config line " + std::to_string(line_no) + ": missing value for '" + std::string(key) + "'");
        }
        it->set(cfg, value, base_dir);
    }
    if (!seen.contains("clusters")) cfg.clusters = profile_clusters(cfg.profile);
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.parent_path());
}

std::string format_config(const PipelineConfig& cfg) {
    std::string out = "# effective configuration\n";
    for (const Key& k : keys()) out += std::string(k.name) + " = " + k.get(cfg) + "\n";
    return out;
}

} // namespace anoseg
