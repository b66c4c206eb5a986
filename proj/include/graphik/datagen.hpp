#pragma once

#include "graphik/kinematics.hpp"
#include "graphik/rng.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace graphik {

enum class LengthSlot { a, d };

/// One row of the per-family DH template: fixed offset and twist, and the
/// range of the single translational parameter that carries the link length.
struct JointTemplate {
    double theta_off;
    double alpha;
    LengthSlot slot;
    double min_length;
    double max_length;
};

/// DH templates for the 3-, 5- and 6-DOF families.
std::span<const JointTemplate> family_template(int dof);

inline constexpr double kFirstLinkMin = 40.0;
inline constexpr double kFirstLinkMax = 60.0;
inline constexpr double kMinLinkLength = 5.0;

/// U_{i+1} = max(0.75 U_i + delta * 0.15 U_i, 5) with delta in [-1, 1].
double next_link_length(double previous, double delta) noexcept;

/// Draws U_1 ~ U[40, 60] and the recursion with delta ~ U[-1, 1]; whole chains
/// that leave any per-joint range of the family template are redrawn.
std::vector<double> sample_link_lengths(int dof, CounterRng& rng);

/// Places the lengths into the a/d slots of the family template.
ManipulatorConfig make_config(int dof, std::span<const double> lengths);

/// One joint configuration together with its derived pose.
struct Sample {
    ManipulatorConfig config;
    std::vector<double> theta_deg;
    Pose pose;

    [[nodiscard]] int dof() const noexcept { return config.dof(); }
    [[nodiscard]] double theta_rad(int i) const noexcept { return deg_to_rad(theta_deg[i]); }
    [[nodiscard]] Transform dh(int i) const { return dh_matrix(config.joints[i], theta_deg[i]); }
};

/// Columnar samples of a single manipulator configuration.
struct Dataset {
    ManipulatorConfig config;
    int config_id = 0;
    std::uint64_t seed = 0;
    std::string role = "family";
    std::vector<double> theta_deg;  ///< rows x dof, row-major
    std::vector<double> pose;       ///< rows x 6 (x, y, z, Phi, Theta, Psi)

    [[nodiscard]] int dof() const noexcept { return config.dof(); }
    [[nodiscard]] std::size_t rows() const noexcept { return pose.size() / 6; }
    [[nodiscard]] std::span<const double> theta_row(std::size_t r) const {
        return {theta_deg.data() + r * static_cast<std::size_t>(dof()), static_cast<std::size_t>(dof())};
    }
    [[nodiscard]] std::span<const double> pose_row(std::size_t r) const { return {pose.data() + r * 6, 6}; }
    [[nodiscard]] Sample sample(std::size_t r) const;
};

/// Grid over whole-degree cells for the "> 1 degree in infinity norm"
/// distinctness test. Any stored vector within 1 degree of a query lies in one
/// of the 3^dof cells adjacent to the query's cell, so probing those is exact.
class DistinctnessIndex {
public:
    explicit DistinctnessIndex(int dof);

    [[nodiscard]] int dof() const noexcept { return dof_; }
    [[nodiscard]] std::size_t size() const noexcept { return size_; }

    /// True iff every stored vector differs from theta by more than 1 degree
    /// in some component (plain, non-circular difference).
    [[nodiscard]] bool is_distinct(std::span<const double> theta) const;
    void insert(std::span<const double> theta);
    /// Check-and-insert; returns whether theta was accepted.
    bool insert_if_distinct(std::span<const double> theta);

private:
    [[nodiscard]] std::uint64_t cell_key(std::span<const int> cell) const noexcept;

    int dof_;
    std::size_t size_ = 0;
    std::unordered_map<std::uint64_t, std::vector<double>> cells_;
};

inline constexpr double kDistinctnessDeg = 1.0;

struct FamilySpec {
    int dof = 3;
    int n_configs = 10;
    int samples_per_config = 1000;
    std::uint64_t seed = 0;
};

struct GenerationOptions {
    int threads = 1;
    std::uint64_t max_consecutive_rejections = 1'000'000;
};

void validate(const FamilySpec& spec);

/// Samples for one configuration: distinct, collision free, with FK poses.
/// Candidate k reads counters [k*dof, (k+1)*dof) of the angle substream;
/// acceptance happens in candidate order, so the result does not depend on
/// the number of threads. Throws SaturationError after too many consecutive
/// rejections.
Dataset generate_config_samples(const ManipulatorConfig& config, int config_id, std::size_t samples,
                                std::uint64_t seed, const GenerationOptions& options = {});

/// Link-length configurations of a family, in config-id order.
std::vector<ManipulatorConfig> sample_family_configs(const FamilySpec& spec);

/// Generates every configuration of the family and hands each finished
/// dataset to the sink in config-id order.
void generate_dataset(const FamilySpec& spec, const std::function<void(Dataset&&)>& sink,
                      const GenerationOptions& options = {});
std::vector<Dataset> generate_dataset(const FamilySpec& spec, const GenerationOptions& options = {});

struct SplitPlan {
    std::vector<int> train_ids;
    int test_id = -1;
    ManipulatorConfig validation_config;
    int validation_id = -1;
};

inline constexpr std::size_t kValidationSamples = 10'000;

/// Withholds the longest configuration (lowest id on ties) for testing and
/// draws a fresh validation configuration whose total length lies within the
/// [min, max] total length of the training configurations. Needs at least
/// three configurations.
SplitPlan split_family(std::span<const ManipulatorConfig> configs, std::uint64_t seed);

}  // namespace graphik
