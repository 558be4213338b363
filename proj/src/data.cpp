#include "prosub/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "prosub/rng.hpp"

namespace prosub {

using nlohmann::json;

const char* normalization_mode_name(NormalizationSpec::Mode m) {
    return m == NormalizationSpec::Mode::global_max99 ? "global_max99"
                                                      : "per_measurement_max99";
}

NormalizationSpec::Mode normalization_mode_from_name(const std::string& name) {
    if (name == "global_max99") return NormalizationSpec::Mode::global_max99;
    if (name == "per_measurement_max99") return NormalizationSpec::Mode::per_measurement_max99;
    throw std::invalid_argument("unknown normalization mode: " + name);
}

void MeasurementDataset::validate() const {
    if (n() < 1) throw std::invalid_argument("dataset: need at least one sample");
    if (n_measurements() < 2) throw std::invalid_argument("dataset: need at least two measurements");
    if (measurement_ids.size() != n_measurements()) {
        throw LengthMismatchError("dataset: measurement id count != N");
    }
    if (subject_ids.size() != n()) {
        throw LengthMismatchError("dataset: subject id count != n");
    }
    for (const auto& s : subject_ids) {
        if (s.empty()) throw std::invalid_argument("dataset: empty subject label");
    }
    if (!samples.all_finite()) throw NanEntryError("dataset: non-finite entry");
}

std::vector<std::string> MeasurementDataset::unique_subjects() const {
    std::vector<std::string> out;
    for (const auto& s : subject_ids) {
        if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    }
    return out;
}

MeasurementDataset MeasurementDataset::subset_by_subjects(
    const std::vector<std::string>& keep) const {
    std::vector<size_t> rows;
    for (size_t i = 0; i < n(); ++i) {
        if (std::find(keep.begin(), keep.end(), subject_ids[i]) != keep.end()) {
            rows.push_back(i);
        }
    }
    MeasurementDataset out;
    out.samples = samples.take_rows(rows);
    out.measurement_ids = measurement_ids;
    out.subject_ids.reserve(rows.size());
    for (size_t r : rows) out.subject_ids.push_back(subject_ids[r]);
    out.normalization = normalization;
    return out;
}

double nearest_rank_percentile(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("percentile of empty set");
    std::sort(values.begin(), values.end());
    size_t rank = static_cast<size_t>(std::ceil(p * static_cast<double>(values.size())));
    if (rank < 1) rank = 1;
    if (rank > values.size()) rank = values.size();
    return values[rank - 1];
}

std::pair<MeasurementDataset, NormalizationSpec> normalize(const MeasurementDataset& train,
                                                           NormalizationSpec::Mode mode) {
    train.validate();
    if (train.normalization) {
        throw std::invalid_argument("normalize: dataset already carries a normalization");
    }
    NormalizationSpec spec;
    spec.mode = mode;
    if (mode == NormalizationSpec::Mode::global_max99) {
        double d = nearest_rank_percentile(train.samples.values(), 0.99);
        if (d <= 0.0) throw std::invalid_argument("normalize: non-positive divisor");
        spec.divisors = {d};
    } else {
        spec.divisors.resize(train.n_measurements());
        std::vector<double> col(train.n());
        for (size_t j = 0; j < train.n_measurements(); ++j) {
            for (size_t i = 0; i < train.n(); ++i) col[i] = train.samples.at(i, j);
            double d = nearest_rank_percentile(col, 0.99);
            if (d <= 0.0) {
                throw std::invalid_argument("normalize: non-positive divisor in column " +
                                            std::to_string(j));
            }
            spec.divisors[j] = d;
        }
    }
    return {apply_normalization(train, spec), spec};
}

MeasurementDataset apply_normalization(const MeasurementDataset& ds,
                                       const NormalizationSpec& spec) {
    MeasurementDataset out = ds;
    if (spec.mode == NormalizationSpec::Mode::global_max99) {
        if (spec.divisors.size() != 1) throw LengthMismatchError("normalization: expected one divisor");
        double d = spec.divisors[0];
        for (double& x : out.samples.values()) x /= d;
    } else {
        if (spec.divisors.size() != ds.n_measurements()) {
            throw LengthMismatchError("normalization: divisor count != N");
        }
        for (size_t i = 0; i < out.n(); ++i) {
            double* row = out.samples.row(i);
            for (size_t j = 0; j < out.n_measurements(); ++j) row[j] /= spec.divisors[j];
        }
    }
    out.normalization = spec;
    return out;
}

void RedundancyPlan::validate(size_t n_measurements, size_t latent_dim) const {
    if (designated.size() != latent_dim) {
        throw std::invalid_argument("plan: designated count != latent dim");
    }
    std::set<size_t> seen;
    for (size_t j = 0; j < designated.size(); ++j) {
        size_t m = designated[j];
        if (m >= n_measurements) throw std::invalid_argument("plan: designated index out of range");
        if (!seen.insert(m).second) throw std::invalid_argument("plan: duplicate designated index");
    }
    if (weights.size() != n_measurements) {
        throw std::invalid_argument("plan: weight rows != N");
    }
    for (const auto& row : weights) {
        if (row.size() != latent_dim) throw std::invalid_argument("plan: weight row length != k");
    }
    // designated rows must be exact unit rows so the noiseless guarantee holds
    for (size_t j = 0; j < designated.size(); ++j) {
        for (size_t c = 0; c < latent_dim; ++c) {
            double expect = (c == j) ? 1.0 : 0.0;
            if (weights[designated[j]][c] != expect) {
                throw std::invalid_argument("plan: designated row is not a unit row");
            }
        }
    }
}

namespace {

RedundancyPlan plan_skeleton(size_t n_meas, size_t k, std::vector<size_t> designated) {
    RedundancyPlan plan;
    plan.designated = std::move(designated);
    plan.weights.assign(n_meas, std::vector<double>(k, 0.0));
    for (size_t j = 0; j < plan.designated.size(); ++j) {
        plan.weights[plan.designated[j]][j] = 1.0;
    }
    return plan;
}

}  // namespace

RedundancyPlan duplicates_plan(size_t n_meas, size_t k, std::vector<size_t> designated) {
    RedundancyPlan plan = plan_skeleton(n_meas, k, std::move(designated));
    size_t pos = 0;
    for (size_t m = 0; m < n_meas; ++m) {
        if (std::find(plan.designated.begin(), plan.designated.end(), m) !=
            plan.designated.end()) {
            continue;
        }
        plan.weights[m][pos % k] = 1.0;
        ++pos;
    }
    plan.validate(n_meas, k);
    return plan;
}

RedundancyPlan single_mixture_plan(size_t n_meas, size_t k, std::vector<size_t> designated) {
    RedundancyPlan plan = plan_skeleton(n_meas, k, std::move(designated));
    size_t extras = n_meas - k;
    size_t pos = 0;
    for (size_t m = 0; m < n_meas; ++m) {
        if (std::find(plan.designated.begin(), plan.designated.end(), m) !=
            plan.designated.end()) {
            continue;
        }
        // distinct scales, one shared direction
        double scale = extras > 1 ? 0.8 + 0.4 * static_cast<double>(pos) /
                                              static_cast<double>(extras - 1)
                                  : 1.0;
        for (size_t c = 0; c < k; ++c) plan.weights[m][c] = scale / static_cast<double>(k);
        ++pos;
    }
    plan.validate(n_meas, k);
    return plan;
}

void SyntheticSpec::validate() const {
    if (latent_dim > n_measurements) throw std::invalid_argument("synthetic: k > N");
    if (latent_dim < 1) throw std::invalid_argument("synthetic: k >= 1");
    if (noise_std < 0.0) throw std::invalid_argument("synthetic: negative noise");
    if (n < 1 || n_measurements < 2) throw std::invalid_argument("synthetic: bad dims");
    if (n_subjects < 1 || n_subjects > n) throw std::invalid_argument("synthetic: bad subject count");
    if (decay_terms < 1) throw std::invalid_argument("synthetic: decay_terms >= 1");
    plan.validate(n_measurements, latent_dim);
}

MeasurementDataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const size_t n = spec.n, N = spec.n_measurements, k = spec.latent_dim;

    MeasurementDataset ds;
    ds.samples = Matrix(n, N);
    std::vector<double> tau(k);
    for (size_t j = 0; j < k; ++j) {
        tau[j] = k > 1 ? static_cast<double>(j) / static_cast<double>(k - 1) : 0.0;
    }
    std::vector<double> z(k);
    for (size_t i = 0; i < n; ++i) {
        // each latent is its own multi-exponential decay, with independent
        // per-sample amplitudes and rates, sampled at its grid point
        for (size_t j = 0; j < k; ++j) {
            double v = 0.0;
            for (size_t c = 0; c < spec.decay_terms; ++c) {
                double amp = rng.uniform(spec.amp_min, spec.amp_max);
                double rate = rng.uniform(spec.rate_min, spec.rate_max);
                v += amp * std::exp(-rate * tau[j]);
            }
            z[j] = v;
        }
        double* row = ds.samples.row(i);
        for (size_t m = 0; m < N; ++m) {
            double v = 0.0;
            const auto& w = spec.plan.weights[m];
            for (size_t j = 0; j < k; ++j) v += w[j] * z[j];
            if (spec.noise_std > 0.0) v += rng.normal(0.0, spec.noise_std);
            row[m] = v;
        }
    }

    ds.measurement_ids.reserve(N);
    for (size_t m = 0; m < N; ++m) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "meas%04zu", m);
        ds.measurement_ids.emplace_back(buf);
    }
    ds.subject_ids.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        size_t s = i * spec.n_subjects / n;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "subj%02zu", s);
        ds.subject_ids.emplace_back(buf);
    }
    ds.validate();
    return ds;
}

SyntheticSpec synthetic_spec_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    SyntheticSpec spec;
    spec.n = j.value("n", spec.n);
    spec.n_measurements = j.value("N", spec.n_measurements);
    spec.latent_dim = j.value("k", spec.latent_dim);
    spec.noise_std = j.value("noise_std", spec.noise_std);
    spec.seed = j.value("seed", spec.seed);
    spec.n_subjects = j.value("subjects", spec.n_subjects);
    spec.decay_terms = j.value("decay_terms", spec.decay_terms);
    spec.rate_min = j.value("rate_min", spec.rate_min);
    spec.rate_max = j.value("rate_max", spec.rate_max);
    spec.amp_min = j.value("amp_min", spec.amp_min);
    spec.amp_max = j.value("amp_max", spec.amp_max);

    std::vector<size_t> designated;
    std::string mode = "single_mixture";
    if (j.contains("plan")) {
        const json& p = j.at("plan");
        mode = p.value("mode", mode);
        if (p.contains("designated")) {
            designated = p.at("designated").get<std::vector<size_t>>();
        }
        if (mode == "custom") {
            RedundancyPlan plan;
            plan.designated = designated;
            plan.weights = p.at("weights").get<std::vector<std::vector<double>>>();
            spec.plan = std::move(plan);
            spec.validate();
            return spec;
        }
    }
    if (designated.empty()) {
        for (size_t c = 0; c < spec.latent_dim; ++c) {
            designated.push_back((2 * c + 1) * spec.n_measurements / (2 * spec.latent_dim));
        }
    }
    if (mode == "duplicates") {
        spec.plan = duplicates_plan(spec.n_measurements, spec.latent_dim, designated);
    } else if (mode == "single_mixture") {
        spec.plan = single_mixture_plan(spec.n_measurements, spec.latent_dim, designated);
    } else {
        throw std::invalid_argument("synthetic: unknown plan mode '" + mode + "'");
    }
    spec.validate();
    return spec;
}

std::vector<CvSplit> make_folds(const std::vector<std::string>& subject_ids, int n_folds) {
    std::vector<std::string> subjects;
    for (const auto& s : subject_ids) {
        if (std::find(subjects.begin(), subjects.end(), s) == subjects.end()) {
            subjects.push_back(s);
        }
    }
    if (subjects.size() < 3) {
        throw std::invalid_argument("make_folds: need at least 3 subjects");
    }
    if (n_folds < 1 || static_cast<size_t>(n_folds) > subjects.size()) {
        throw std::invalid_argument("make_folds: fold count exceeds subject count");
    }
    std::vector<CvSplit> folds;
    const size_t S = subjects.size();
    for (int f = 0; f < n_folds; ++f) {
        CvSplit split;
        size_t val = static_cast<size_t>(f) % S;
        size_t test = (val + 1) % S;
        split.validation_subjects = {subjects[val]};
        split.test_subjects = {subjects[test]};
        for (size_t s = 0; s < S; ++s) {
            if (s != val && s != test) split.train_subjects.push_back(subjects[s]);
        }
        folds.push_back(std::move(split));
    }
    return folds;
}

// ---------------------------------------------------------------------------
// binary format

namespace {

constexpr char kMagic[4] = {'O', 'S', 'D', 'S'};
constexpr uint32_t kDatasetVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* what) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw MalformedHeaderError(std::string("dataset: truncated ") + what);
    return v;
}

json normalization_to_json(const NormalizationSpec& spec) {
    return json{{"mode", normalization_mode_name(spec.mode)}, {"divisors", spec.divisors}};
}

NormalizationSpec normalization_from_json(const json& j) {
    NormalizationSpec spec;
    spec.mode = normalization_mode_from_name(j.at("mode").get<std::string>());
    spec.divisors = j.at("divisors").get<std::vector<double>>();
    return spec;
}

}  // namespace

void save_dataset(const MeasurementDataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DatasetError("dataset: cannot open for write: " + path);
    os.write(kMagic, 4);
    put<uint32_t>(os, kDatasetVersion);
    put<uint64_t>(os, ds.n());
    put<uint64_t>(os, ds.n_measurements());

    std::vector<std::string> table = ds.unique_subjects();
    put<uint64_t>(os, table.size());
    for (const auto& s : table) {
        put<uint16_t>(os, static_cast<uint16_t>(s.size()));
        os.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    for (const auto& s : ds.subject_ids) {
        auto it = std::find(table.begin(), table.end(), s);
        put<uint32_t>(os, static_cast<uint32_t>(it - table.begin()));
    }
    for (double v : ds.samples.values()) put<float>(os, static_cast<float>(v));
    if (!os) throw DatasetError("dataset: write failed: " + path);

    json sidecar;
    sidecar["measurement_ids"] = ds.measurement_ids;
    sidecar["normalization"] =
        ds.normalization ? normalization_to_json(*ds.normalization) : json(nullptr);
    std::ofstream js(path + ".json");
    js << sidecar.dump(2) << "\n";
    if (!js) throw DatasetError("dataset: sidecar write failed");
}

MeasurementDataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DatasetError("dataset: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw MalformedHeaderError("dataset: bad magic bytes");
    }
    uint32_t version = get<uint32_t>(is, "version");
    if (version != kDatasetVersion) {
        throw MalformedHeaderError("dataset: unsupported version " + std::to_string(version));
    }
    uint64_t n = get<uint64_t>(is, "sample count");
    uint64_t N = get<uint64_t>(is, "measurement count");
    uint64_t table_len = get<uint64_t>(is, "subject table");
    std::vector<std::string> table(table_len);
    for (auto& s : table) {
        uint16_t len = get<uint16_t>(is, "subject label");
        s.resize(len);
        is.read(s.data(), len);
        if (!is) throw MalformedHeaderError("dataset: truncated subject table");
    }
    MeasurementDataset ds;
    ds.subject_ids.reserve(n);
    for (uint64_t i = 0; i < n; ++i) {
        uint32_t idx = get<uint32_t>(is, "subject index");
        if (idx >= table.size()) throw LengthMismatchError("dataset: subject index out of range");
        ds.subject_ids.push_back(table[idx]);
    }
    std::vector<double> values;
    values.reserve(n * N);
    for (uint64_t i = 0; i < n * N; ++i) {
        float v;
        is.read(reinterpret_cast<char*>(&v), sizeof(float));
        if (!is) throw LengthMismatchError("dataset: payload shorter than n*N");
        values.push_back(static_cast<double>(v));
    }
    is.peek();
    if (!is.eof()) throw LengthMismatchError("dataset: trailing bytes after payload");
    ds.samples = Matrix(n, N, std::move(values));

    std::ifstream js(path + ".json");
    if (js) {
        json sidecar = json::parse(js, nullptr, /*allow_exceptions=*/true);
        ds.measurement_ids = sidecar.at("measurement_ids").get<std::vector<std::string>>();
        if (ds.measurement_ids.size() != N) {
            throw LengthMismatchError("dataset: sidecar measurement id count != N");
        }
        if (!sidecar.at("normalization").is_null()) {
            ds.normalization = normalization_from_json(sidecar.at("normalization"));
        }
    } else {
        for (uint64_t m = 0; m < N; ++m) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "meas%04llu", static_cast<unsigned long long>(m));
            ds.measurement_ids.emplace_back(buf);
        }
    }
    ds.validate();
    return ds;
}

// ---------------------------------------------------------------------------
// CSV format

void save_dataset_csv(const MeasurementDataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream os(path);
    if (!os) throw DatasetError("dataset: cannot open for write: " + path);
    os << "subject";
    for (const auto& id : ds.measurement_ids) os << "," << id;
    os << "\n";
    char buf[32];
    for (size_t i = 0; i < ds.n(); ++i) {
        os << ds.subject_ids[i];
        const double* row = ds.samples.row(i);
        for (size_t j = 0; j < ds.n_measurements(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", row[j]);
            os << "," << buf;
        }
        os << "\n";
    }
    if (!os) throw DatasetError("dataset: csv write failed");
}

namespace {

void chomp(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

MeasurementDataset load_dataset_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DatasetError("dataset: cannot open: " + path);
    std::string line;
    if (!std::getline(is, line)) throw MalformedHeaderError("dataset: empty csv");
    chomp(line);
    MeasurementDataset ds;
    {
        std::stringstream ss(line);
        std::string cell;
        if (!std::getline(ss, cell, ',') || cell != "subject") {
            throw MalformedHeaderError("dataset: csv header must start with 'subject'");
        }
        while (std::getline(ss, cell, ',')) ds.measurement_ids.push_back(cell);
    }
    const size_t N = ds.measurement_ids.size();
    if (N < 2) throw MalformedHeaderError("dataset: csv header has fewer than 2 measurements");
    std::vector<double> values;
    while (std::getline(is, line)) {
        chomp(line);
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        if (!std::getline(ss, cell, ',')) throw LengthMismatchError("dataset: bad csv row");
        ds.subject_ids.push_back(cell);
        size_t count = 0;
        while (std::getline(ss, cell, ',')) {
            size_t pos = 0;
            double v;
            try {
                v = std::stod(cell, &pos);
            } catch (const std::exception&) {
                throw DatasetError("dataset: unparsable csv value '" + cell + "'");
            }
            if (pos != cell.size()) throw DatasetError("dataset: unparsable csv value '" + cell + "'");
            if (std::isnan(v)) throw NanEntryError("dataset: NaN entry in csv");
            values.push_back(v);
            ++count;
        }
        if (count != N) throw LengthMismatchError("dataset: csv row length != header");
    }
    ds.samples = Matrix(ds.subject_ids.size(), N, std::move(values));
    ds.validate();
    return ds;
}

}  // namespace prosub
