#include "graphik/datagen.hpp"

#include "graphik/errors.hpp"
#include "graphik/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace graphik {
namespace {

// theta_off, alpha, slot, length range (cm)
constexpr std::array<JointTemplate, 3> kThreeDof{{
    {0.0, 90.0, LengthSlot::d, 40.0, 60.0},
    {90.0, 0.0, LengthSlot::a, 24.0, 36.0},
    {0.0, 0.0, LengthSlot::a, 15.0, 20.0},
}};

constexpr std::array<JointTemplate, 5> kFiveDof{{
    {0.0, 90.0, LengthSlot::d, 40.0, 60.0},
    {90.0, 0.0, LengthSlot::a, 24.0, 36.0},
    {0.0, 0.0, LengthSlot::a, 15.0, 20.0},
    {-90.0, -90.0, LengthSlot::a, 9.0, 13.0},
    {0.0, 0.0, LengthSlot::d, 5.0, 8.0},
}};

constexpr std::array<JointTemplate, 6> kSixDof{{
    {0.0, 90.0, LengthSlot::d, 40.0, 60.0},
    {90.0, 0.0, LengthSlot::a, 24.0, 36.0},
    {-90.0, -90.0, LengthSlot::a, 15.0, 20.0},
    {0.0, 90.0, LengthSlot::d, 9.0, 13.0},
    {0.0, -90.0, LengthSlot::a, 5.0, 8.0},
    {0.0, 0.0, LengthSlot::d, 5.0, 5.0},
}};

constexpr std::uint64_t kMaxLengthDraws = 10'000'000;
constexpr std::size_t kCandidateBlock = 4096;

std::uint64_t validation_stream_index(int n_configs) { return static_cast<std::uint64_t>(n_configs); }

}  // namespace

std::span<const JointTemplate> family_template(int dof) {
    switch (dof) {
        case 3: return kThreeDof;
        case 5: return kFiveDof;
        case 6: return kSixDof;
        default: break;
    }
    throw std::invalid_argument("unsupported dof " + std::to_string(dof) + " (expected 3, 5 or 6)");
}

double next_link_length(double previous, double delta) noexcept {
    return std::max(0.75 * previous + delta * 0.15 * previous, kMinLinkLength);
}

std::vector<double> sample_link_lengths(int dof, CounterRng& rng) {
    const auto table = family_template(dof);
    std::vector<double> lengths(table.size());
    for (std::uint64_t attempt = 0; attempt < kMaxLengthDraws; ++attempt) {
        lengths[0] = rng.uniform(kFirstLinkMin, kFirstLinkMax);
        bool inside = true;
        for (std::size_t i = 1; i < table.size(); ++i) {
            // Always consume the same number of draws per attempt.
            lengths[i] = next_link_length(lengths[i - 1], rng.uniform(-1.0, 1.0));
            inside = inside && lengths[i] >= table[i].min_length && lengths[i] <= table[i].max_length;
        }
        if (inside) return lengths;
    }
    throw SaturationError("sample_link_lengths: no admissible chain for dof " + std::to_string(dof));
}

ManipulatorConfig make_config(int dof, std::span<const double> lengths) {
    const auto table = family_template(dof);
    if (lengths.size() != table.size()) {
        throw std::invalid_argument("make_config: expected " + std::to_string(table.size()) + " lengths");
    }
    ManipulatorConfig config;
    for (std::size_t i = 0; i < table.size(); ++i) {
        DHJoint j;
        j.theta_off = table[i].theta_off;
        j.alpha = table[i].alpha;
        (table[i].slot == LengthSlot::a ? j.a : j.d) = lengths[i];
        config.joints.push_back(j);
    }
    return config;
}

Sample Dataset::sample(std::size_t r) const {
    if (r >= rows()) throw std::out_of_range("Dataset::sample: row out of range");
    Sample s;
    s.config = config;
    const auto t = theta_row(r);
    s.theta_deg.assign(t.begin(), t.end());
    const auto p = pose_row(r);
    s.pose.position = {p[0], p[1], p[2]};
    s.pose.orientation = {p[3], p[4], p[5]};
    return s;
}

DistinctnessIndex::DistinctnessIndex(int dof) : dof_(dof) {
    if (dof < 1 || dof > 7) throw std::invalid_argument("DistinctnessIndex: dof must be in [1, 7]");
}

std::uint64_t DistinctnessIndex::cell_key(std::span<const int> cell) const noexcept {
    // Cells are offset by 2 so neighbours of cell -1 stay non-negative; 9 bits per joint.
    std::uint64_t key = 0;
    for (int c : cell) key = (key << 9) | static_cast<std::uint64_t>((c + 2) & 0x1ff);
    return key;
}

bool DistinctnessIndex::is_distinct(std::span<const double> theta) const {
    if (static_cast<int>(theta.size()) != dof_) throw std::invalid_argument("DistinctnessIndex: dof mismatch");
    std::array<int, 8> base{}, cell{}, offset{};
    for (int i = 0; i < dof_; ++i) base[i] = static_cast<int>(std::floor(theta[i]));
    offset.fill(-1);

    // Enumerate the 3^dof neighbour cells with an odometer over offsets.
    while (true) {
        for (int i = 0; i < dof_; ++i) cell[i] = base[i] + offset[i];
        const auto it = cells_.find(cell_key({cell.data(), static_cast<std::size_t>(dof_)}));
        if (it != cells_.end()) {
            const auto& stored = it->second;
            for (std::size_t row = 0; row < stored.size(); row += static_cast<std::size_t>(dof_)) {
                double inf_norm = 0.0;
                for (int i = 0; i < dof_; ++i) inf_norm = std::max(inf_norm, std::abs(stored[row + i] - theta[i]));
                if (inf_norm <= kDistinctnessDeg) return false;
            }
        }
        int i = 0;
        while (i < dof_ && offset[i] == 1) offset[i++] = -1;
        if (i == dof_) break;
        ++offset[i];
    }
    return true;
}

void DistinctnessIndex::insert(std::span<const double> theta) {
    if (static_cast<int>(theta.size()) != dof_) throw std::invalid_argument("DistinctnessIndex: dof mismatch");
    std::array<int, 8> cell{};
    for (int i = 0; i < dof_; ++i) cell[i] = static_cast<int>(std::floor(theta[i]));
    auto& bucket = cells_[cell_key({cell.data(), static_cast<std::size_t>(dof_)})];
    bucket.insert(bucket.end(), theta.begin(), theta.end());
    ++size_;
}

bool DistinctnessIndex::insert_if_distinct(std::span<const double> theta) {
    if (!is_distinct(theta)) return false;
    insert(theta);
    return true;
}

void validate(const FamilySpec& spec) {
    (void)family_template(spec.dof);
    if (spec.n_configs < 1) throw std::invalid_argument("FamilySpec: n_configs must be >= 1");
    if (spec.samples_per_config < 1) throw std::invalid_argument("FamilySpec: samples_per_config must be >= 1");
}

Dataset generate_config_samples(const ManipulatorConfig& config, int config_id, std::size_t samples,
                                std::uint64_t seed, const GenerationOptions& options) {
    const int dof = config.dof();
    const auto udof = static_cast<std::size_t>(dof);
    const CounterRng angles = CounterRng::substream(seed, "datagen-angles", static_cast<std::uint64_t>(config_id));

    Dataset out;
    out.config = config;
    out.config_id = config_id;
    out.seed = seed;
    out.theta_deg.reserve(samples * udof);
    out.pose.reserve(samples * 6);

    DistinctnessIndex index(dof);
    std::vector<double> block_theta(kCandidateBlock * udof);
    std::vector<std::array<double, 6>> block_pose(kCandidateBlock);
    std::vector<char> block_ok(kCandidateBlock);

    std::uint64_t candidate = 0;
    std::uint64_t consecutive_rejections = 0;
    while (out.rows() < samples) {
        const std::uint64_t first = candidate;
        parallel_for(kCandidateBlock, options.threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t k = begin; k < end; ++k) {
                double* theta = block_theta.data() + k * udof;
                const std::uint64_t base = (first + k) * udof;
                for (std::size_t i = 0; i < udof; ++i) theta[i] = 360.0 * angles.uniform_at(base + i);
                const auto fk = forward_kinematics(config, {theta, udof});
                block_ok[k] = check_collision(config, fk.frames) == CollisionVerdict::free;
                block_pose[k] = fk.pose.as_array();
            }
        });
        candidate += kCandidateBlock;

        for (std::size_t k = 0; k < kCandidateBlock && out.rows() < samples; ++k) {
            const std::span<const double> theta(block_theta.data() + k * udof, udof);
            if (block_ok[k] && index.insert_if_distinct(theta)) {
                out.theta_deg.insert(out.theta_deg.end(), theta.begin(), theta.end());
                out.pose.insert(out.pose.end(), block_pose[k].begin(), block_pose[k].end());
                consecutive_rejections = 0;
            } else if (++consecutive_rejections > options.max_consecutive_rejections) {
                std::ostringstream msg;
                msg << "configuration " << config_id << " saturated: more than "
                    << options.max_consecutive_rejections << " consecutive rejections after "
                    << out.rows() << " accepted samples";
                throw SaturationError(msg.str());
            }
        }
    }
    return out;
}

std::vector<ManipulatorConfig> sample_family_configs(const FamilySpec& spec) {
    validate(spec);
    std::vector<ManipulatorConfig> configs;
    for (int c = 0; c < spec.n_configs; ++c) {
        auto rng = CounterRng::substream(spec.seed, "datagen-lengths", static_cast<std::uint64_t>(c));
        configs.push_back(make_config(spec.dof, sample_link_lengths(spec.dof, rng)));
    }
    return configs;
}

void generate_dataset(const FamilySpec& spec, const std::function<void(Dataset&&)>& sink,
                      const GenerationOptions& options) {
    const auto configs = sample_family_configs(spec);
    for (int c = 0; c < spec.n_configs; ++c) {
        sink(generate_config_samples(configs[c], c, static_cast<std::size_t>(spec.samples_per_config),
                                     spec.seed, options));
    }
}

std::vector<Dataset> generate_dataset(const FamilySpec& spec, const GenerationOptions& options) {
    std::vector<Dataset> out;
    generate_dataset(spec, [&](Dataset&& d) { out.push_back(std::move(d)); }, options);
    return out;
}

SplitPlan split_family(std::span<const ManipulatorConfig> configs, std::uint64_t seed) {
    // Two training configurations are needed for a reach interval of nonzero width.
    if (configs.size() < 3) throw std::invalid_argument("split_family: need at least three configurations");
    const int dof = configs.front().dof();
    for (const auto& c : configs) {
        if (c.dof() != dof) throw std::invalid_argument("split_family: mixed dof in family");
    }

    SplitPlan plan;
    plan.test_id = 0;
    for (std::size_t i = 1; i < configs.size(); ++i) {
        // Strict comparison keeps the lowest id on ties.
        if (configs[i].total_length() > configs[plan.test_id].total_length()) plan.test_id = static_cast<int>(i);
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        if (static_cast<int>(i) == plan.test_id) continue;
        plan.train_ids.push_back(static_cast<int>(i));
        lo = std::min(lo, configs[i].total_length());
        hi = std::max(hi, configs[i].total_length());
    }

    plan.validation_id = static_cast<int>(configs.size());
    auto rng = CounterRng::substream(seed, "datagen-validation-lengths", validation_stream_index(plan.validation_id));
    for (std::uint64_t attempt = 0; attempt < kMaxLengthDraws; ++attempt) {
        auto candidate = make_config(dof, sample_link_lengths(dof, rng));
        const double total = candidate.total_length();
        const bool unused = std::none_of(configs.begin(), configs.end(),
                                         [&](const ManipulatorConfig& c) { return c == candidate; });
        if (total >= lo && total <= hi && unused) {
            plan.validation_config = std::move(candidate);
            return plan;
        }
    }
    throw SaturationError("split_family: no validation configuration inside the training reach");
}

}  // namespace graphik
