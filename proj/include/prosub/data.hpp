#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "prosub/matrix.hpp"

namespace prosub {

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class MalformedHeaderError : public DatasetError {
public:
    using DatasetError::DatasetError;
};
class NanEntryError : public DatasetError {
public:
    using DatasetError::DatasetError;
};
class LengthMismatchError : public DatasetError {
public:
    using DatasetError::DatasetError;
};

struct NormalizationSpec {
    enum class Mode { global_max99, per_measurement_max99 };
    Mode mode = Mode::global_max99;
    // one divisor for global mode, one per measurement otherwise
    std::vector<double> divisors;
};

const char* normalization_mode_name(NormalizationSpec::Mode m);
NormalizationSpec::Mode normalization_mode_from_name(const std::string& name);

struct MeasurementDataset {
    Matrix samples;  // n x N
    std::vector<std::string> measurement_ids;  // length N
    std::vector<std::string> subject_ids;      // length n
    std::optional<NormalizationSpec> normalization;

    size_t n() const { return samples.rows(); }
    size_t n_measurements() const { return samples.cols(); }
    void validate() const;
    std::vector<std::string> unique_subjects() const;  // in first-seen order
    MeasurementDataset subset_by_subjects(const std::vector<std::string>& keep) const;
};

// Nearest-rank percentile: the ceil(p*n)-th order statistic (1-based).
double nearest_rank_percentile(std::vector<double> values, double p);

// Divisors come from `train` only; frozen in the returned spec so held-out
// subjects can be normalized with apply_normalization.
std::pair<MeasurementDataset, NormalizationSpec> normalize(const MeasurementDataset& train,
                                                           NormalizationSpec::Mode mode);
MeasurementDataset apply_normalization(const MeasurementDataset& ds,
                                       const NormalizationSpec& spec);

// How the N measurements are wired to the k latents. Designated rows are unit
// rows (exact copies of one latent each); the rest mix latents and exist to be
// pruned.
struct RedundancyPlan {
    std::vector<size_t> designated;          // size k; designated[j] copies latent j
    std::vector<std::vector<double>> weights;  // N rows of k mixing weights
    void validate(size_t n_measurements, size_t latent_dim) const;
};

// Non-designated rows copy latent (position % k).
RedundancyPlan duplicates_plan(size_t n_measurements, size_t latent_dim,
                               std::vector<size_t> designated);
// Non-designated rows are scaled copies of the uniform latent mixture, so any
// two of them are linearly dependent.
RedundancyPlan single_mixture_plan(size_t n_measurements, size_t latent_dim,
                                   std::vector<size_t> designated);

struct SyntheticSpec {
    size_t n = 1000;
    size_t n_measurements = 8;  // N
    size_t latent_dim = 3;      // k
    double noise_std = 0.0;
    uint64_t seed = 1;
    size_t n_subjects = 5;
    // per-sample multi-exponential decay parameters
    size_t decay_terms = 2;
    double rate_min = 0.5, rate_max = 3.0;
    double amp_min = 0.5, amp_max = 2.0;
    RedundancyPlan plan;

    void validate() const;
};

// Each sample draws a multi-exponential decay; the k latents sample that curve
// on a fixed grid, and each measurement is its plan row's mix of the latents
// plus Gaussian noise. With zero noise, the designated k-subset reconstructs
// all N measurements exactly by least squares.
MeasurementDataset generate_synthetic(const SyntheticSpec& spec);

// Parses the CLI's --synthetic spec file. Plan modes: "duplicates",
// "single_mixture" (default), or "custom" with explicit weights; designated
// indices default to an evenly spread subset.
SyntheticSpec synthetic_spec_from_json(const std::string& json_text);

struct CvSplit {
    std::vector<std::string> train_subjects;
    std::vector<std::string> validation_subjects;
    std::vector<std::string> test_subjects;
};

// Fold f holds out subjects[f] for validation and subjects[f+1 mod S] for
// testing; the rest train.
std::vector<CvSplit> make_folds(const std::vector<std::string>& subject_ids, int n_folds = 5);

// Binary "OSDS" format (f32 payload) with a JSON sidecar (<path>.json) for
// measurement ids and the applied normalization.
void save_dataset(const MeasurementDataset& ds, const std::string& path);
MeasurementDataset load_dataset(const std::string& path);

// CSV: header "subject,<id0>,..."; one sample per row, subject in column 0.
void save_dataset_csv(const MeasurementDataset& ds, const std::string& path);
MeasurementDataset load_dataset_csv(const std::string& path);

}  // namespace prosub
