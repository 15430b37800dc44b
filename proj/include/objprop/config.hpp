#pragma once

#include "objprop/fusion.hpp"
#include "objprop/plane.hpp"
#include "objprop/proposals2d.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace objprop {

/// Raised for unknown keys, malformed values and out-of-range settings.
class ConfigError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

struct PipelineConfig
{
    // Proposal filtering.
    double eps_delta = 0.5;  // m, depth range that triggers background masking
    double eps_min = 0.02;   // m, smallest object extent
    double eps_max = 1.0;    // m, largest object extent
    bool depth_clamp = false;
    double clamp_low = 0.01;
    double clamp_high = 0.99;

    // Supporting plane.
    double eps_p = 0.005;  // m, plane inlier distance
    int ransac_iterations = 10000;
    int top_k = 5;
    int keyframe_interval = 10;
    int ransac_window = 11;
    int score_stride = 2;
    int refine_iterations = 3;
    double plane_angle_deg = 10.0;
    double plane_offset = 0.05;

    // Fusion.
    double eps_intensity = 0.05;
    double eps_depth = 0.01;  // m

    // Ranking and boxes.
    double tau = 10.0;
    double eps_rank = 0.25;
    int frequency_count = 5;
    double frequency_fraction = 0.05;
    double dbscan_eps = 0.02;  // m
    int dbscan_min_pts = 10;
    double min_box_volume = 1e-6;  // m^3

    int downsample = 1;
    std::uint64_t seed = 1;
    int threads = 1;

    void validate() const;  // throws ConfigError

    /// Value of a key in file syntax. Throws ConfigError for unknown keys.
    std::string get(const std::string& key) const;
    /// Parses and assigns one key without validating the whole config.
    void set(const std::string& key, const std::string& value);

    FilterParams filter_params() const;
    RansacParams ransac_params() const;
    MatchParams match_params() const;

    bool operator==(const PipelineConfig&) const = default;
};

struct ConfigKey
{
    std::string name;
    std::string help;
};
const std::vector<ConfigKey>& config_keys();

/// Flat "key = value" text, '#' starts a comment.
PipelineConfig parse_config(const std::string& text, const std::string& source = "config");
PipelineConfig read_config(const std::filesystem::path& path);
std::string config_to_string(const PipelineConfig& config);
void write_config(const std::filesystem::path& path, const PipelineConfig& config);

}  // namespace objprop
