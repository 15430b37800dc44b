#include "objprop/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <variant>

namespace objprop {

namespace {

using Field = std::variant<double PipelineConfig::*, int PipelineConfig::*, bool PipelineConfig::*,
                           std::uint64_t PipelineConfig::*>;

struct Entry
{
    const char* name;
    Field field;
    const char* help;
};

const std::vector<Entry>& entries()
{
    static const std::vector<Entry> table = {
        {"eps_delta", &PipelineConfig::eps_delta, "depth range (m) above which a proposal's far pixels are masked"},
        {"eps_min", &PipelineConfig::eps_min, "smallest metric extent (m) of an accepted proposal"},
        {"eps_max", &PipelineConfig::eps_max, "largest metric extent (m) of an accepted proposal"},
        {"depth_clamp", &PipelineConfig::depth_clamp, "use percentile-clamped window depth ranges"},
        {"clamp_low", &PipelineConfig::clamp_low, "lower depth percentile when depth_clamp is on"},
        {"clamp_high", &PipelineConfig::clamp_high, "upper depth percentile when depth_clamp is on"},
        {"eps_p", &PipelineConfig::eps_p, "plane inlier distance (m)"},
        {"ransac_iterations", &PipelineConfig::ransac_iterations, "RANSAC hypotheses per keyframe"},
        {"top_k", &PipelineConfig::top_k, "distinct planes kept per keyframe"},
        {"keyframe_interval", &PipelineConfig::keyframe_interval, "frames between plane re-estimations"},
        {"ransac_window", &PipelineConfig::ransac_window, "side of the pixel window sample triples come from"},
        {"score_stride", &PipelineConfig::score_stride, "pixel stride of the hypothesis scoring subsample"},
        {"refine_iterations", &PipelineConfig::refine_iterations, "least-squares refinements per plane"},
        {"plane_angle_deg", &PipelineConfig::plane_angle_deg, "normal angle (deg) separating distinct planes"},
        {"plane_offset", &PipelineConfig::plane_offset, "offset (m) separating distinct planes"},
        {"eps_intensity", &PipelineConfig::eps_intensity, "color distance for warp matches"},
        {"eps_depth", &PipelineConfig::eps_depth, "depth difference (m) for warp matches"},
        {"tau", &PipelineConfig::tau, "frequency offset of the pseudo-average confidence"},
        {"eps_rank", &PipelineConfig::eps_rank, "pseudo-average confidence threshold"},
        {"frequency_count", &PipelineConfig::frequency_count, "observations a point needs at most"},
        {"frequency_fraction", &PipelineConfig::frequency_fraction, "observations needed as a fraction of frames"},
        {"dbscan_eps", &PipelineConfig::dbscan_eps, "clustering radius (m)"},
        {"dbscan_min_pts", &PipelineConfig::dbscan_min_pts, "neighbors (self included) of a core point"},
        {"min_box_volume", &PipelineConfig::min_box_volume, "smallest output box volume (m^3)"},
        {"downsample", &PipelineConfig::downsample, "image downsampling factor, 1 or 2"},
        {"seed", &PipelineConfig::seed, "random seed"},
        {"threads", &PipelineConfig::threads, "worker threads for plane estimation"},
    };
    return table;
}

const Entry& find_entry(const std::string& key)
{
    for (const auto& e : entries())
        if (key == e.name)
            return e;
    throw ConfigError("unknown config key '" + key + "'");
}

std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& text)
{
    T v{};
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw ConfigError("config key '" + key + "': '" + text + "' is not an integer");
    return v;
}

std::string trim(const std::string& s)
{
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos)
        return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

const std::vector<ConfigKey>& config_keys()
{
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> out;
        for (const auto& e : entries())
            out.push_back({e.name, e.help});
        return out;
    }();
    return keys;
}

std::string PipelineConfig::get(const std::string& key) const
{
    const Entry& e = find_entry(key);
    return std::visit(
        [&](auto member) -> std::string {
            using T = std::decay_t<decltype(this->*member)>;
            if constexpr (std::is_same_v<T, double>)
                return format_double(this->*member);
            else if constexpr (std::is_same_v<T, bool>)
                return (this->*member) ? "true" : "false";
            else
                return std::to_string(this->*member);
        },
        e.field);
}

void PipelineConfig::set(const std::string& key, const std::string& raw)
{
    const Entry& e = find_entry(key);
    const std::string value = trim(raw);
    std::visit(
        [&](auto member) {
            using T = std::decay_t<decltype(this->*member)>;
            if constexpr (std::is_same_v<T, double>) {
                double v = 0.0;
                const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
                if (res.ec != std::errc{} || res.ptr != value.data() + value.size() || !std::isfinite(v))
                    throw ConfigError("config key '" + key + "': '" + value + "' is not a number");
                this->*member = v;
            } else if constexpr (std::is_same_v<T, bool>) {
                if (value == "true" || value == "1")
                    this->*member = true;
                else if (value == "false" || value == "0")
                    this->*member = false;
                else
                    throw ConfigError("config key '" + key + "': '" + value + "' is not a boolean");
            } else {
                this->*member = parse_integer<T>(key, value);
            }
        },
        e.field);
}

void PipelineConfig::validate() const
{
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0))
            throw ConfigError(std::string("config key '") + name + "' must be positive");
    };
    positive(eps_delta, "eps_delta");
    positive(eps_min, "eps_min");
    positive(eps_max, "eps_max");
    if (eps_min >= eps_max)
        throw ConfigError("config: eps_min must be smaller than eps_max");
    if (!(clamp_low >= 0.0 && clamp_low < clamp_high && clamp_high <= 1.0))
        throw ConfigError("config: need 0 <= clamp_low < clamp_high <= 1");
    positive(eps_p, "eps_p");
    positive(ransac_iterations, "ransac_iterations");
    positive(top_k, "top_k");
    positive(keyframe_interval, "keyframe_interval");
    positive(score_stride, "score_stride");
    if (ransac_window < 3 || ransac_window % 2 == 0)
        throw ConfigError("config key 'ransac_window' must be an odd number >= 3");
    if (refine_iterations < 0)
        throw ConfigError("config key 'refine_iterations' must be non-negative");
    positive(plane_angle_deg, "plane_angle_deg");
    positive(plane_offset, "plane_offset");
    positive(eps_intensity, "eps_intensity");
    positive(eps_depth, "eps_depth");
    if (!(tau >= 0.0))
        throw ConfigError("config key 'tau' must be non-negative");
    if (!(eps_rank >= 0.0))
        throw ConfigError("config key 'eps_rank' must be non-negative");
    positive(frequency_count, "frequency_count");
    if (!(frequency_fraction >= 0.0 && frequency_fraction <= 1.0))
        throw ConfigError("config key 'frequency_fraction' must be in [0, 1]");
    positive(dbscan_eps, "dbscan_eps");
    positive(dbscan_min_pts, "dbscan_min_pts");
    if (!(min_box_volume >= 0.0))
        throw ConfigError("config key 'min_box_volume' must be non-negative");
    if (downsample != 1 && downsample != 2)
        throw ConfigError("config key 'downsample' must be 1 or 2");
    positive(threads, "threads");
}

FilterParams PipelineConfig::filter_params() const
{
    FilterParams p;
    p.eps_delta = eps_delta;
    p.eps_min = eps_min;
    p.eps_max = eps_max;
    if (depth_clamp)
        p.clamp = PercentileClamp{clamp_low, clamp_high};
    return p;
}

RansacParams PipelineConfig::ransac_params() const
{
    RansacParams p;
    p.iterations = ransac_iterations;
    p.eps_p = eps_p;
    p.top_k = top_k;
    p.window = ransac_window;
    p.score_stride = score_stride;
    p.refine_iterations = refine_iterations;
    p.distinct_angle_deg = plane_angle_deg;
    p.distinct_offset = plane_offset;
    p.threads = threads;
    return p;
}

MatchParams PipelineConfig::match_params() const { return {eps_intensity, eps_depth}; }

PipelineConfig parse_config(const std::string& text, const std::string& source)
{
    PipelineConfig config;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key = value");
        try {
            config.set(trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(source + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    config.validate();
    return config;
}

PipelineConfig read_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::string config_to_string(const PipelineConfig& config)
{
    std::ostringstream os;
    for (const auto& e : entries())
        os << "# " << e.help << "\n" << e.name << " = " << config.get(e.name) << "\n";
    return os.str();
}

void write_config(const std::filesystem::path& path, const PipelineConfig& config)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << config_to_string(config);
}

}  // namespace objprop
