#include "mmcr/experiment.hpp"

#include "mmcr/capacity.hpp"
#include "mmcr/error.hpp"
#include "mmcr/evaluation.hpp"
#include "mmcr/geometry.hpp"
#include "mmcr/objective.hpp"
#include "mmcr/spectral.hpp"
#include "mmcr/trainer.hpp"

#include "json.hpp"

#include <openssl/evp.h>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mmcr {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------- presets

namespace {

struct PresetInfo {
    const char* name;
    bool deterministic;
};

constexpr PresetInfo kPresets[] = {
    {"train-basic", true},        {"lambda-sweep", true},       {"capacity-layers", true},
    {"gradient-coherence", true}, {"subspace-alignment", true}, {"robustness", true},
    {"theorem-verify", true},     {"batch-sweep", true},        {"bench", false},
};

std::string preset_list()
{
    std::string s;
    for (const auto& p : kPresets)
        s += (s.empty() ? "" : ", ") + std::string(p.name);
    return s;
}

const PresetInfo& find_preset(const std::string& name, const std::string& field)
{
    for (const auto& p : kPresets)
        if (name == p.name)
            return p;
    throw ConfigError(field + ": unknown preset '" + name + "'; available presets: " + preset_list());
}

}  // namespace

const std::vector<std::string>& preset_names()
{
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& p : kPresets)
            v.emplace_back(p.name);
        return v;
    }();
    return names;
}

bool preset_is_deterministic(const std::string& name) { return find_preset(name, "experiment").deterministic; }

ExperimentConfig preset_config(const std::string& name)
{
    find_preset(name, "experiment");
    ExperimentConfig c;
    c.experiment = name;
    c.output_dir = "runs/" + name;
    return c;
}

// ------------------------------------------------------------- validation

namespace {

void require(bool ok, const std::string& field, const std::string& what)
{
    if (!ok)
        throw ConfigError(field + ": " + what);
}

template <class T>
void require_positive_all(const std::vector<T>& v, const std::string& field)
{
    require(!v.empty(), field, "must be non-empty");
    for (const T& x : v)
        require(x > T(0), field, "entries must be positive");
}

}  // namespace

void validate(const ExperimentConfig& c)
{
    find_preset(c.experiment, "experiment");
    require(!c.output_dir.empty(), "output_dir", "must be non-empty");

    const auto& d = c.dataset;
    require(d.n_classes >= 2, "dataset.n_classes", "must be >= 2");
    require(d.n_per_class >= 2, "dataset.n_per_class", "must be >= 2");
    require(d.intrinsic_dim >= 2 && d.intrinsic_dim <= d.ambient_dim, "dataset.intrinsic_dim",
            "must be in [2, ambient_dim]");
    require(d.coeff_std > 0.0, "dataset.coeff_std", "must be positive");
    require(d.offset_norm >= 0.0, "dataset.offset_norm", "must be >= 0");
    require(d.noise_sigma >= 0.0, "dataset.noise_sigma", "must be >= 0");
    require(d.radius_spread >= 0.0, "dataset.radius_spread", "must be >= 0");
    require(c.test_fraction > 0.0 && c.test_fraction < 1.0, "test_fraction", "must be in (0, 1)");

    const auto& a = c.augmentation;
    require(a.jitter_sigma >= 0.0, "augmentation.jitter_sigma", "must be >= 0");
    require(a.scale_lo > 0.0 && a.scale_lo <= a.scale_hi, "augmentation.scale_lo", "need 0 < scale_lo <= scale_hi");
    require(a.mask_fraction >= 0.0 && a.mask_fraction < 1.0, "augmentation.mask_fraction", "must be in [0, 1)");
    require(a.rotation_angle_max >= 0.0, "augmentation.rotation_angle_max", "must be >= 0");

    require(c.encoder_dims.size() >= 2, "encoder_dims", "needs an input and an output dimension");
    require_positive_all(c.encoder_dims, "encoder_dims");
    require(c.encoder_dims.front() == d.ambient_dim, "encoder_dims", "first entry must equal dataset.ambient_dim");
    require(c.projector_layers <= c.encoder_dims.size() - 1, "projector_layers", "exceeds the layer count");

    const auto& t = c.training;
    require(t.batch_b >= 2, "training.batch_b", "must be >= 2");
    require(t.views_k >= 1, "training.views_k", "must be >= 1");
    require(t.lambda >= 0.0, "training.lambda", "must be >= 0");
    require(t.lr > 0.0, "training.lr", "must be positive");
    require(t.weight_decay >= 0.0, "training.weight_decay", "must be >= 0");

    const auto& an = c.analysis;
    require(an.capacity_samples >= 100, "analysis.capacity_samples", "must be >= 100");
    require(an.kappa >= 0.0, "analysis.kappa", "must be >= 0");
    require(an.capacity_max_dim >= 1, "analysis.capacity_max_dim", "must be >= 1");
    require(an.scenes_per_class >= 2, "analysis.scenes_per_class", "must be >= 2");
    require(an.manifold_views >= 2, "analysis.manifold_views", "must be >= 2");
    require(an.coherence_batches_per_class >= 1, "analysis.coherence_batches_per_class", "must be >= 1");
    require(an.coherence_batch_b >= 2, "analysis.coherence_batch_b", "must be >= 2");
    require(an.coherence_views_k >= 1, "analysis.coherence_views_k", "must be >= 1");
    require(!an.attack_epsilons.empty() && an.attack_epsilons.front() == 0.0, "analysis.attack_epsilons",
            "must start at 0");
    for (std::size_t i = 1; i < an.attack_epsilons.size(); ++i)
        require(an.attack_epsilons[i] > an.attack_epsilons[i - 1], "analysis.attack_epsilons",
                "must be strictly ascending");
    require(an.attack_iterations >= 1, "analysis.attack_iterations", "must be >= 1");
    require_positive_all(an.attack_iteration_grid, "analysis.attack_iteration_grid");
    require(an.attack_sweep_epsilon >= 0.0, "analysis.attack_sweep_epsilon", "must be >= 0");
    require(!an.lambda_grid.empty(), "analysis.lambda_grid", "must be non-empty");
    for (double l : an.lambda_grid)
        require(l >= 0.0, "analysis.lambda_grid", "entries must be >= 0");
    require(!an.batch_grid.empty(), "analysis.batch_grid", "must be non-empty");
    for (std::size_t b : an.batch_grid)
        require(b >= 2, "analysis.batch_grid", "entries must be >= 2");
    require(an.theorem_n >= 1 && an.theorem_k >= 1, "analysis.theorem_n", "n and k must be >= 1");
    require(an.theorem_d >= 1 && an.theorem_d <= an.theorem_n, "analysis.theorem_d", "must be in [1, theorem_n]");
    require(an.theorem_trials >= 1, "analysis.theorem_trials", "must be >= 1");

    const auto& b = c.bench;
    require_positive_all(b.b_grid, "bench.b_grid");
    require_positive_all(b.d_grid, "bench.d_grid");
    require_positive_all(b.k_grid, "bench.k_grid");
    require(b.fixed_b >= 1 && b.fixed_d >= 1 && b.fixed_k >= 1, "bench.fixed_b", "fixed sizes must be >= 1");
    require(b.repeats >= 1, "bench.repeats", "must be >= 1");
    require(b.lambda >= 0.0, "bench.lambda", "must be >= 0");
}

// ---------------------------------------------------------- serialization

namespace {

json to_json(const DatasetConfig& d)
{
    return {{"n_classes", d.n_classes},         {"n_per_class", d.n_per_class}, {"ambient_dim", d.ambient_dim},
            {"intrinsic_dim", d.intrinsic_dim}, {"coeff_std", d.coeff_std},     {"offset_norm", d.offset_norm},
            {"noise_sigma", d.noise_sigma},     {"radius_spread", d.radius_spread},
            {"standardize", d.standardize}};
}

json to_json(const AugmentationSpec& a)
{
    return {{"jitter_sigma", a.jitter_sigma},   {"scale_lo", a.scale_lo},
            {"scale_hi", a.scale_hi},           {"mask_fraction", a.mask_fraction},
            {"rotation_angle_max", a.rotation_angle_max}};
}

json to_json(const TrainingParams& t)
{
    return {{"batch_b", t.batch_b}, {"views_k", t.views_k},           {"lambda", t.lambda},
            {"lr", t.lr},           {"weight_decay", t.weight_decay}, {"epochs", t.epochs}};
}

json to_json(const AnalysisParams& a)
{
    return {{"capacity_samples", a.capacity_samples},
            {"kappa", a.kappa},
            {"capacity_max_dim", a.capacity_max_dim},
            {"scenes_per_class", a.scenes_per_class},
            {"manifold_views", a.manifold_views},
            {"coherence_batches_per_class", a.coherence_batches_per_class},
            {"coherence_batch_b", a.coherence_batch_b},
            {"coherence_views_k", a.coherence_views_k},
            {"attack_epsilons", a.attack_epsilons},
            {"attack_iterations", a.attack_iterations},
            {"attack_iteration_grid", a.attack_iteration_grid},
            {"attack_sweep_epsilon", a.attack_sweep_epsilon},
            {"lambda_grid", a.lambda_grid},
            {"batch_grid", a.batch_grid},
            {"theorem_n", a.theorem_n},
            {"theorem_k", a.theorem_k},
            {"theorem_d", a.theorem_d},
            {"theorem_trials", a.theorem_trials}};
}

json to_json(const ScalingGrid& g)
{
    return {{"b_grid", g.b_grid},   {"d_grid", g.d_grid},   {"k_grid", g.k_grid},   {"fixed_b", g.fixed_b},
            {"fixed_d", g.fixed_d}, {"fixed_k", g.fixed_k}, {"repeats", g.repeats}, {"lambda", g.lambda}};
}

json to_json(const ExperimentConfig& c)
{
    return {{"experiment", c.experiment},
            {"seed", c.seed},
            {"output_dir", c.output_dir},
            {"dataset", to_json(c.dataset)},
            {"test_fraction", c.test_fraction},
            {"augmentation", to_json(c.augmentation)},
            {"encoder_dims", c.encoder_dims},
            {"projector_layers", c.projector_layers},
            {"training", to_json(c.training)},
            {"analysis", to_json(c.analysis)},
            {"bench", to_json(c.bench)}};
}

// Reads the fields of one JSON object, tracking which keys were consumed so
// leftovers can be reported as unknown.
class FieldReader {
public:
    FieldReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path))
    {
        if (!obj_.is_object())
            throw ConfigError((path_.empty() ? "config" : path_) + ": expected an object");
    }

    void size(const char* key, std::size_t& out)
    {
        if (const json* v = take(key)) {
            if (!v->is_number_unsigned())
                throw ConfigError(field(key) + ": expected a non-negative integer");
            out = v->get<std::size_t>();
        }
    }
    void u64(const char* key, std::uint64_t& out)
    {
        if (const json* v = take(key)) {
            if (!v->is_number_unsigned())
                throw ConfigError(field(key) + ": expected a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }
    void real(const char* key, double& out)
    {
        if (const json* v = take(key)) {
            if (!v->is_number())
                throw ConfigError(field(key) + ": expected a number");
            out = v->get<double>();
        }
    }
    void boolean(const char* key, bool& out)
    {
        if (const json* v = take(key)) {
            if (!v->is_boolean())
                throw ConfigError(field(key) + ": expected true or false");
            out = v->get<bool>();
        }
    }
    void string(const char* key, std::string& out)
    {
        if (const json* v = take(key)) {
            if (!v->is_string())
                throw ConfigError(field(key) + ": expected a string");
            out = v->get<std::string>();
        }
    }
    void sizes(const char* key, std::vector<std::size_t>& out)
    {
        if (const json* v = take(key)) {
            if (!v->is_array())
                throw ConfigError(field(key) + ": expected an array of non-negative integers");
            std::vector<std::size_t> r;
            for (std::size_t i = 0; i < v->size(); ++i) {
                if (!(*v)[i].is_number_unsigned())
                    throw ConfigError(field(key) + "[" + std::to_string(i) + "]: expected a non-negative integer");
                r.push_back((*v)[i].get<std::size_t>());
            }
            out = std::move(r);
        }
    }
    void reals(const char* key, std::vector<double>& out)
    {
        if (const json* v = take(key)) {
            if (!v->is_array())
                throw ConfigError(field(key) + ": expected an array of numbers");
            std::vector<double> r;
            for (std::size_t i = 0; i < v->size(); ++i) {
                if (!(*v)[i].is_number())
                    throw ConfigError(field(key) + "[" + std::to_string(i) + "]: expected a number");
                r.push_back((*v)[i].get<double>());
            }
            out = std::move(r);
        }
    }
    /// Sub-object reader, or nothing when the key is absent.
    const json* object(const char* key) { return take(key); }
    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const
    {
        for (const auto& [key, value] : obj_.items())
            if (!seen_.count(key))
                throw ConfigError(field(key) + ": unknown field");
    }

private:
    const json* take(const char* key)
    {
        seen_.insert(key);
        const auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

void from_json(const json& j, const std::string& path, DatasetConfig& d)
{
    FieldReader r(j, path);
    r.size("n_classes", d.n_classes);
    r.size("n_per_class", d.n_per_class);
    r.size("ambient_dim", d.ambient_dim);
    r.size("intrinsic_dim", d.intrinsic_dim);
    r.real("coeff_std", d.coeff_std);
    r.real("offset_norm", d.offset_norm);
    r.real("noise_sigma", d.noise_sigma);
    r.real("radius_spread", d.radius_spread);
    r.boolean("standardize", d.standardize);
    r.finish();
}

void from_json(const json& j, const std::string& path, AugmentationSpec& a)
{
    FieldReader r(j, path);
    r.real("jitter_sigma", a.jitter_sigma);
    r.real("scale_lo", a.scale_lo);
    r.real("scale_hi", a.scale_hi);
    r.real("mask_fraction", a.mask_fraction);
    r.real("rotation_angle_max", a.rotation_angle_max);
    r.finish();
}

void from_json(const json& j, const std::string& path, TrainingParams& t)
{
    FieldReader r(j, path);
    r.size("batch_b", t.batch_b);
    r.size("views_k", t.views_k);
    r.real("lambda", t.lambda);
    r.real("lr", t.lr);
    r.real("weight_decay", t.weight_decay);
    r.size("epochs", t.epochs);
    r.finish();
}

void from_json(const json& j, const std::string& path, AnalysisParams& a)
{
    FieldReader r(j, path);
    r.size("capacity_samples", a.capacity_samples);
    r.real("kappa", a.kappa);
    r.size("capacity_max_dim", a.capacity_max_dim);
    r.size("scenes_per_class", a.scenes_per_class);
    r.size("manifold_views", a.manifold_views);
    r.size("coherence_batches_per_class", a.coherence_batches_per_class);
    r.size("coherence_batch_b", a.coherence_batch_b);
    r.size("coherence_views_k", a.coherence_views_k);
    r.reals("attack_epsilons", a.attack_epsilons);
    r.size("attack_iterations", a.attack_iterations);
    r.sizes("attack_iteration_grid", a.attack_iteration_grid);
    r.real("attack_sweep_epsilon", a.attack_sweep_epsilon);
    r.reals("lambda_grid", a.lambda_grid);
    r.sizes("batch_grid", a.batch_grid);
    r.size("theorem_n", a.theorem_n);
    r.size("theorem_k", a.theorem_k);
    r.size("theorem_d", a.theorem_d);
    r.size("theorem_trials", a.theorem_trials);
    r.finish();
}

void from_json(const json& j, const std::string& path, ScalingGrid& g)
{
    FieldReader r(j, path);
    r.sizes("b_grid", g.b_grid);
    r.sizes("d_grid", g.d_grid);
    r.sizes("k_grid", g.k_grid);
    r.size("fixed_b", g.fixed_b);
    r.size("fixed_d", g.fixed_d);
    r.size("fixed_k", g.fixed_k);
    r.size("repeats", g.repeats);
    r.real("lambda", g.lambda);
    r.finish();
}

ExperimentConfig config_from_object(const json& j)
{
    FieldReader r(j, "");
    ExperimentConfig c;
    r.string("experiment", c.experiment);
    // Preset defaults first so a file naming only the preset gets its output directory.
    find_preset(c.experiment, "experiment");
    c = preset_config(c.experiment);
    r.u64("seed", c.seed);
    r.string("output_dir", c.output_dir);
    if (const json* v = r.object("dataset"))
        from_json(*v, "dataset", c.dataset);
    r.real("test_fraction", c.test_fraction);
    if (const json* v = r.object("augmentation"))
        from_json(*v, "augmentation", c.augmentation);
    r.sizes("encoder_dims", c.encoder_dims);
    r.size("projector_layers", c.projector_layers);
    if (const json* v = r.object("training"))
        from_json(*v, "training", c.training);
    if (const json* v = r.object("analysis"))
        from_json(*v, "analysis", c.analysis);
    if (const json* v = r.object("bench"))
        from_json(*v, "bench", c.bench);
    r.finish();
    return c;
}

json parse_json(const std::string& text, const std::string& what)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(what + ": invalid JSON: " + e.what());
    }
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string config_to_json(const ExperimentConfig& config, int indent) { return to_json(config).dump(indent); }

ExperimentConfig config_from_json(const std::string& text)
{
    ExperimentConfig c = config_from_object(parse_json(text, "config"));
    validate(c);
    return c;
}

ExperimentConfig load_config(const fs::path& path)
{
    const std::string text = read_file(path);
    try {
        return config_from_json(text);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void apply_env_overrides(ExperimentConfig& config)
{
    if (const char* dir = std::getenv("MMCR_OUTPUT_DIR"); dir && *dir)
        config.output_dir = dir;
    if (const char* threads = std::getenv("MMCR_THREADS"); threads && *threads) {
        char* end = nullptr;
        const long n = std::strtol(threads, &end, 10);
        if (*end != '\0' || n < 1 || n > 4096)
            throw ConfigError(std::string("MMCR_THREADS: expected a positive integer, got '") + threads + "'");
        omp_set_num_threads(static_cast<int>(n));
    }
}

// ----------------------------------------------------------------- hashing

std::string sha256_hex(const std::string& bytes)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw NumericalFailure("sha256: digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

// ---------------------------------------------------------------- manifest

std::string manifest_to_json(const RunManifest& m, int indent)
{
    json j;
    j["artifact_version"] = m.artifact_version;
    j["experiment"] = m.config.experiment;
    j["seed"] = m.config.seed;
    j["deterministic"] = m.deterministic;
    j["started_utc"] = m.started_utc;
    j["finished_utc"] = m.finished_utc;
    j["config"] = to_json(m.config);
    j["files"] = json::array();
    for (const auto& f : m.files)
        j["files"].push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    return j.dump(indent);
}

RunManifest manifest_from_json(const std::string& text)
{
    const json j = parse_json(text, "manifest");
    RunManifest m;
    try {
        m.config = config_from_object(j.at("config"));
        m.artifact_version = j.at("artifact_version").get<std::string>();
        m.started_utc = j.at("started_utc").get<std::string>();
        m.finished_utc = j.at("finished_utc").get<std::string>();
        m.deterministic = j.at("deterministic").get<bool>();
        for (const auto& f : j.at("files"))
            m.files.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>(),
                               f.at("bytes").get<std::uintmax_t>()});
    } catch (const json::exception& e) {
        throw ConfigError(std::string("manifest: ") + e.what());
    }
    return m;
}

// --------------------------------------------------------------------- run

namespace {

std::string utc_now()
{
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string fmt_g(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", x);
    return buf;
}

class RunContext {
public:
    RunContext(const ExperimentConfig& c, Exec e) : cfg(c), exec(e), dir(c.output_dir) {}

    void write(const std::string& name, const std::string& content)
    {
        const fs::path p = dir / name;
        std::ofstream out(p, std::ios::binary);
        if (!out)
            throw IoError("cannot write " + p.string());
        out << content;
        if (!out)
            throw IoError("write failed for " + p.string());
        files.push_back(name);
    }

    const ExperimentConfig& cfg;
    Exec exec;
    fs::path dir;
    std::vector<std::string> files;
    json summary = json::object();
};

struct Prepared {
    SceneDataset ds;
    DatasetSplit split;
    MlpEncoder untrained;
};

Prepared prepare(const ExperimentConfig& c)
{
    RngStream drng(derive_seed(c.seed, "dataset"));
    SceneDataset ds = make_dataset(c.dataset, drng);
    RngStream srng(derive_seed(c.seed, "split"));
    DatasetSplit split = split_dataset(ds, c.test_fraction, srng);
    RngStream erng(derive_seed(c.seed, "encoder"));
    MlpEncoder enc(c.encoder_dims, erng, c.projector_layers);
    return {std::move(ds), std::move(split), std::move(enc)};
}

TrainState train_encoder(const RunContext& ctx, const Prepared& p, const TrainingParams& tp)
{
    TrainState state = make_train_state(p.untrained, derive_seed(ctx.cfg.seed, "train"));
    TrainConfig tc;
    tc.epochs = tp.epochs;
    tc.batch_b = tp.batch_b;
    tc.views_k = tp.views_k;
    tc.lambda = tp.lambda;
    tc.lr = tp.lr;
    tc.weight_decay = tp.weight_decay;
    tc.exec = ctx.exec;
    if (tc.batch_b > p.split.train.size())
        throw ConfigError("training.batch_b: " + std::to_string(tc.batch_b) + " exceeds the " +
                          std::to_string(p.split.train.size()) + " training scenes");
    train(state, p.ds, p.split.train, ctx.cfg.augmentation, tc);
    return state;
}

struct Readout {
    LinearProbe probe;
    double probe_acc = 0.0;
    double knn_acc = 0.0;
};

Readout readout(const MlpEncoder& enc, const Prepared& p, Exec exec)
{
    const Matrix ftr = enc.encode(p.ds.rows(p.split.train), exec);
    const Matrix fte = enc.encode(p.ds.rows(p.split.test), exec);
    const auto ytr = p.ds.labels_of(p.split.train);
    const auto yte = p.ds.labels_of(p.split.test);
    Readout r;
    r.probe = fit_probe(ftr, ytr);
    r.probe_acc = r.probe.accuracy(fte, yte);
    r.knn_acc = knn_monitor(ftr, ytr, fte, yte);
    return r;
}

std::string history_text(const std::vector<EpochRecord>& h)
{
    std::ostringstream os;
    write_history_jsonl(os, h);
    return os.str();
}

// Adds final_<field> for every field of the last history record.
void summarize_history(json& summary, const std::vector<EpochRecord>& h, const std::string& suffix = "")
{
    if (h.empty())
        return;
    const json last = json::parse(history_text({h.back()}));
    for (const auto& [key, value] : last.items())
        summary["final_" + key + suffix] = value;
    summary["first_centroid_similarity_mean" + suffix] = h.front().centroid_similarity_mean;
}

// The first `per_class` test scenes of each class, in split order.
std::vector<std::size_t> held_out_scenes(const Prepared& p, std::size_t per_class)
{
    std::vector<std::size_t> pick, count(p.ds.n_classes(), 0);
    for (std::size_t i : p.split.test) {
        const auto c = static_cast<std::size_t>(p.ds.labels[i]);
        if (count[c] < per_class) {
            pick.push_back(i);
            ++count[c];
        }
    }
    for (std::size_t c = 0; c < count.size(); ++c)
        if (count[c] < 2)
            throw DegenerateInput("class " + std::to_string(c) + " has fewer than 2 held-out scenes");
    return pick;
}

Matrix manifold_centroids(const std::vector<PointManifold>& ms, std::vector<int>& labels)
{
    Matrix c(ms.size(), ms.front().dim());
    labels.clear();
    for (std::size_t m = 0; m < ms.size(); ++m) {
        for (std::size_t i = 0; i < ms[m].m(); ++i)
            for (std::size_t j = 0; j < ms[m].dim(); ++j)
                c(m, j) += ms[m].points(i, j) / static_cast<double>(ms[m].m());
        labels.push_back(ms[m].label.value_or(-1));
    }
    return c;
}

json distribution_json(const SimilarityDistributions& s) { return json::parse(similarity_json(s)); }

std::string distribution_row(const std::string& stage, const SimilarityDistributions& s)
{
    std::ostringstream os;
    os.precision(17);
    os << stage << ',' << s.metric << ',' << s.within_class.size() << ',' << s.across_class.size() << ','
       << s.mean_within() << ',' << s.mean_across() << ',' << s.excluded << '\n';
    return os.str();
}

constexpr const char* kDistributionHeader = "stage,metric,n_within,n_across,mean_within,mean_across,excluded\n";

// ----------------------------------------------------------------- presets

void preset_train_basic(RunContext& ctx)
{
    const Prepared p = prepare(ctx.cfg);
    const Readout before = readout(p.untrained, p, ctx.exec);
    const TrainState st = train_encoder(ctx, p, ctx.cfg.training);
    const Readout after = readout(st.encoder, p, ctx.exec);

    ctx.write("history.jsonl", history_text(st.history));
    std::ostringstream ck;
    write_checkpoint(ck, st.encoder);
    ctx.write("encoder.ckpt", ck.str());
    ctx.summary["probe_acc_untrained"] = before.probe_acc;
    ctx.summary["probe_acc_trained"] = after.probe_acc;
    ctx.summary["knn_acc_untrained"] = before.knn_acc;
    ctx.summary["knn_acc_trained"] = after.knn_acc;
    summarize_history(ctx.summary, st.history);
}

void preset_lambda_sweep(RunContext& ctx)
{
    const Prepared p = prepare(ctx.cfg);
    std::ostringstream csv;
    csv.precision(17);
    csv << "lambda,epoch,loss_total,centroid_term,compression_term,centroid_similarity_mean,"
           "within_manifold_similarity\n";
    for (double lambda : ctx.cfg.analysis.lambda_grid) {
        TrainingParams tp = ctx.cfg.training;
        tp.lambda = lambda;
        const TrainState st = train_encoder(ctx, p, tp);
        const std::string tag = fmt_g(lambda);
        ctx.write("history_lambda_" + tag + ".jsonl", history_text(st.history));
        for (const auto& r : st.history)
            csv << lambda << ',' << r.epoch << ',' << r.loss.total << ',' << r.loss.centroid_term << ','
                << r.loss.compression_term << ',' << r.centroid_similarity_mean << ',' << r.within_manifold_similarity
                << '\n';
        const Readout out = readout(st.encoder, p, ctx.exec);
        ctx.summary["probe_acc_lambda_" + tag] = out.probe_acc;
        ctx.summary["knn_acc_lambda_" + tag] = out.knn_acc;
        ctx.summary["final_compression_term_lambda_" + tag] = st.history.back().loss.compression_term;
        ctx.summary["final_centroid_term_lambda_" + tag] = st.history.back().loss.centroid_term;
    }
    ctx.write("lambda_sweep.csv", csv.str());
}

std::vector<LayerSnapshot> layer_snapshots(const MlpEncoder& enc, const Prepared& p,
                                           const std::vector<std::size_t>& scenes, const RunContext& ctx)
{
    const std::size_t k = ctx.cfg.analysis.manifold_views;
    const Matrix views = augment_batch(p.ds, scenes, k, ctx.cfg.augmentation,
                                       RngStream(derive_seed(ctx.cfg.seed, "manifolds")), 0, ctx.exec);
    const ForwardCache cache = enc.forward(views, ctx.exec);
    std::vector<LayerSnapshot> out;
    for (std::size_t l = 0; l < cache.activations.size(); ++l) {
        LayerSnapshot snap;
        snap.name = l == 0 ? "input" : "layer" + std::to_string(l);
        const Matrix& a = cache.activations[l];
        for (std::size_t s = 0; s < scenes.size(); ++s) {
            PointManifold m;
            m.points = Matrix(k, a.cols());
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = 0; j < a.cols(); ++j)
                    m.points(i, j) = a(s * k + i, j);
            m.label = p.ds.labels[scenes[s]];
            snap.manifolds.push_back(std::move(m));
        }
        out.push_back(std::move(snap));
    }
    return out;
}

void preset_capacity_layers(RunContext& ctx)
{
    const Prepared p = prepare(ctx.cfg);
    const TrainState st = train_encoder(ctx, p, ctx.cfg.training);
    ctx.write("history.jsonl", history_text(st.history));
    const auto scenes = held_out_scenes(p, ctx.cfg.analysis.scenes_per_class);
    const auto& an = ctx.cfg.analysis;

    std::ostringstream csv;
    csv.precision(17);
    csv << "stage,layer,original_dim,analysis_dim,alpha,alpha_std_error,mean_radius,mean_dimension,"
           "mean_centroid_cosine\n";
    json detail = json::object();
    for (const auto& [stage, enc] : {std::pair<std::string, const MlpEncoder*>{"untrained", &p.untrained},
                                     {"trained", &st.encoder}}) {
        const auto layers = layerwise_capacity(layer_snapshots(*enc, p, scenes, ctx), an.capacity_samples,
                                               an.kappa, derive_seed(ctx.cfg.seed, "capacity"), an.capacity_max_dim,
                                               derive_seed(ctx.cfg.seed, "projection"), ctx.exec);
        json arr = json::array();
        for (const auto& l : layers) {
            double r = 0.0, d = 0.0;
            for (const auto& g : l.report.per_manifold) {
                r += g.radius;
                d += g.dimension;
            }
            const double n = static_cast<double>(l.report.per_manifold.size());
            csv << stage << ',' << l.name << ',' << l.original_dim << ',' << l.analysis_dim << ',' << l.report.alpha
                << ',' << l.report.std_error << ',' << r / n << ',' << d / n << ',' << l.report.mean_centroid_cosine
                << '\n';
            json e = json::parse(capacity_report_json(l.report));
            e["layer"] = l.name;
            e["original_dim"] = l.original_dim;
            e["analysis_dim"] = l.analysis_dim;
            arr.push_back(std::move(e));
            ctx.summary["alpha_" + stage + "_" + l.name] = l.report.alpha;
            ctx.summary["radius_" + stage + "_" + l.name] = r / n;
            ctx.summary["dimension_" + stage + "_" + l.name] = d / n;
        }
        detail[stage] = std::move(arr);
    }
    ctx.write("capacity_layers.csv", csv.str());
    ctx.write("capacity_layers.json", detail.dump(2));
}

void preset_gradient_coherence(RunContext& ctx)
{
    const Prepared p = prepare(ctx.cfg);
    const TrainState st = train_encoder(ctx, p, ctx.cfg.training);
    ctx.write("history.jsonl", history_text(st.history));
    const auto& an = ctx.cfg.analysis;
    CoherenceConfig cc;
    cc.batches_per_class = an.coherence_batches_per_class;
    cc.batch_b = an.coherence_batch_b;
    cc.views_k = an.coherence_views_k;
    cc.lambda = ctx.cfg.training.lambda;
    cc.groups = {ParamGroup::all, ParamGroup::backbone, ParamGroup::projector, ParamGroup::first_layer,
                 ParamGroup::last_layer};

    std::string csv = kDistributionHeader;
    json detail = json::object();
    for (const auto& [stage, enc] : {std::pair<std::string, const MlpEncoder*>{"untrained", &p.untrained},
                                     {"trained", &st.encoder}}) {
        RngStream rng(derive_seed(ctx.cfg.seed, "coherence"));
        const auto dists = gradient_coherence(*enc, p.ds, p.split.train, ctx.cfg.augmentation, cc, rng, ctx.exec);
        json arr = json::array();
        for (const auto& d : dists) {
            csv += distribution_row(stage, d);
            arr.push_back(distribution_json(d));
            ctx.summary[d.metric + "_" + stage + "_within"] = d.mean_within();
            ctx.summary[d.metric + "_" + stage + "_across"] = d.mean_across();
        }
        detail[stage] = std::move(arr);
    }
    ctx.write("gradient_coherence.csv", csv);
    ctx.write("gradient_coherence.json", detail.dump(2));
}

void preset_subspace_alignment(RunContext& ctx)
{
    const Prepared p = prepare(ctx.cfg);
    const TrainState st = train_encoder(ctx, p, ctx.cfg.training);
    ctx.write("history.jsonl", history_text(st.history));
    const auto scenes = held_out_scenes(p, ctx.cfg.analysis.scenes_per_class);
    const std::size_t k = ctx.cfg.analysis.manifold_views;
    const RngStream aug(derive_seed(ctx.cfg.seed, "manifolds"));

    std::string csv = kDistributionHeader;
    json detail = json::object();
    std::vector<int> labels;

    // Input space: raw centroids, |cos| (signed cosine averages out under full-angle rotations).
    const auto pixel = augmentation_manifolds(nullptr, p.ds, scenes, k, ctx.cfg.augmentation, aug, false, ctx.exec);
    const Matrix pc = manifold_centroids(pixel, labels);
    auto ps = centroid_similarity_stats(pc, labels, {false, true});
    csv += distribution_row("input", ps);
    detail["input"] = json::array({distribution_json(ps)});
    ctx.summary["abs_cosine_input_within"] = ps.mean_within();
    ctx.summary["abs_cosine_input_across"] = ps.mean_across();

    for (const auto& [stage, enc] : {std::pair<std::string, const MlpEncoder*>{"untrained", &p.untrained},
                                     {"trained", &st.encoder}}) {
        const auto ms = augmentation_manifolds(enc, p.ds, scenes, k, ctx.cfg.augmentation, aug, true, ctx.exec);
        const Matrix c = manifold_centroids(ms, labels);
        json arr = json::array();
        for (const auto& d : {centroid_similarity_stats(c, labels), subspace_angle_stats(ms),
                              shared_variance_stats(ms)}) {
            csv += distribution_row(stage, d);
            arr.push_back(distribution_json(d));
            ctx.summary[d.metric + "_" + stage + "_within"] = d.mean_within();
            ctx.summary[d.metric + "_" + stage + "_across"] = d.mean_across();
        }
        detail[stage] = std::move(arr);
    }
    ctx.write("subspace_alignment.csv", csv);
    ctx.write("subspace_alignment.json", detail.dump(2));
}

void preset_robustness(RunContext& ctx)
{
    const Prepared p = prepare(ctx.cfg);
    const auto& an = ctx.cfg.analysis;
    const Matrix xte = p.ds.rows(p.split.test);
    const auto yte = p.ds.labels_of(p.split.test);
    AttackConfig ac;
    ac.iterations = an.attack_iterations;
    ac.seed = derive_seed(ctx.cfg.seed, "attack");

    const auto evaluate = [&](const std::string& variant, const MlpEncoder& enc) {
        const Readout r = readout(enc, p, ctx.exec);
        const auto curve = robustness_curve(enc, r.probe, xte, yte, an.attack_epsilons, ac, ctx.exec);
        std::ostringstream os;
        write_robustness_csv(os, curve);
        ctx.write("robustness_" + variant + ".csv", os.str());
        AttackConfig sweep = ac;
        sweep.epsilon = an.attack_sweep_epsilon;
        std::ostringstream is;
        write_robustness_csv(is, iteration_sweep(enc, r.probe, xte, yte, an.attack_iteration_grid, sweep, ctx.exec));
        ctx.write("iterations_" + variant + ".csv", is.str());
        for (const auto& pt : curve)
            ctx.summary["robust_acc_" + variant + "_eps_" + fmt_g(pt.epsilon)] = pt.robust_acc;
    };

    evaluate("untrained", p.untrained);
    for (double lambda : an.lambda_grid) {
        TrainingParams tp = ctx.cfg.training;
        tp.lambda = lambda;
        const TrainState st = train_encoder(ctx, p, tp);
        evaluate("lambda_" + fmt_g(lambda), st.encoder);
    }
}

void preset_theorem_verify(RunContext& ctx)
{
    const auto& an = ctx.cfg.analysis;
    const auto graph = build_graph(an.theorem_n, an.theorem_k);
    const auto rep = verify_optimality(graph, an.theorem_d, an.theorem_trials,
                                       derive_seed(ctx.cfg.seed, "theorem"), ctx.exec);
    ctx.write("optimality.json", optimality_report_json(rep));

    RngStream rng(derive_seed(ctx.cfg.seed, "theorem-identities"));
    double lemma = 0.0, identity = 0.0;
    const std::size_t d = an.theorem_d;
    for (int i = 0; i < 1000; ++i) {
        const Matrix a = gaussian_matrix(rng, d + 1, d + 1);
        const Matrix b = gaussian_matrix(rng, d + 1, d);
        const auto [x, y] = zero_pad_nuclear_invariance(a, b);
        lemma = std::max(lemma, std::abs(x - y));
        const auto z = sphere_normalize(ManifoldBatch::from_rows(
            gaussian_matrix(rng, an.theorem_n * an.theorem_k, d), an.theorem_n, an.theorem_k));
        const double g = graph_loss(graph, z.as_rows(), ctx.exec);
        const double c = nuclear_norm(centroids(z));
        identity = std::max(identity, std::abs(g + std::sqrt(static_cast<double>(an.theorem_k)) * c));
    }
    ctx.summary["violations"] = rep.violations();
    ctx.summary["optimum_loss"] = rep.optimum_loss;
    ctx.summary["best_unit_row_gap"] = rep.best_unit_row_gap;
    ctx.summary["lemma_max_abs_diff"] = lemma;
    ctx.summary["graph_identity_max_abs_diff"] = identity;
}

void preset_batch_sweep(RunContext& ctx)
{
    const Prepared p = prepare(ctx.cfg);
    std::ostringstream csv;
    csv.precision(17);
    csv << "batch_b,probe_acc,knn_acc,final_loss_total,final_centroid_similarity_mean\n";
    for (std::size_t b : ctx.cfg.analysis.batch_grid) {
        TrainingParams tp = ctx.cfg.training;
        tp.batch_b = b;
        const TrainState st = train_encoder(ctx, p, tp);
        const Readout r = readout(st.encoder, p, ctx.exec);
        const std::string tag = std::to_string(b);
        ctx.write("history_B" + tag + ".jsonl", history_text(st.history));
        csv << b << ',' << r.probe_acc << ',' << r.knn_acc << ',' << st.history.back().loss.total << ','
            << st.history.back().centroid_similarity_mean << '\n';
        ctx.summary["probe_acc_B" + tag] = r.probe_acc;
        ctx.summary["knn_acc_B" + tag] = r.knn_acc;
    }
    ctx.write("batch_sweep.csv", csv.str());
}

void preset_bench(RunContext& ctx)
{
    // Serial so the fitted exponents describe the algorithm, not the thread pool.
    const ScalingReport r = bench_loss_scaling(ctx.cfg.bench, Exec::serial);
    std::ostringstream csv;
    write_scaling_csv(csv, r);
    ctx.write("bench.csv", csv.str());
    ctx.write("bench.json", scaling_report_json(r));
    ctx.summary["b_exponent"] = r.b_exponent;
    ctx.summary["d_exponent"] = r.d_exponent;
    ctx.summary["k_ratio"] = r.k_ratio;
}

void dispatch(RunContext& ctx)
{
    const std::string& n = ctx.cfg.experiment;
    if (n == "train-basic")
        preset_train_basic(ctx);
    else if (n == "lambda-sweep")
        preset_lambda_sweep(ctx);
    else if (n == "capacity-layers")
        preset_capacity_layers(ctx);
    else if (n == "gradient-coherence")
        preset_gradient_coherence(ctx);
    else if (n == "subspace-alignment")
        preset_subspace_alignment(ctx);
    else if (n == "robustness")
        preset_robustness(ctx);
    else if (n == "theorem-verify")
        preset_theorem_verify(ctx);
    else if (n == "batch-sweep")
        preset_batch_sweep(ctx);
    else
        preset_bench(ctx);
}

}  // namespace

RunManifest run(const ExperimentConfig& config, Exec exec)
{
    validate(config);
    RunManifest m;
    m.config = config;
    m.deterministic = preset_is_deterministic(config.experiment);
    m.started_utc = utc_now();
    RunContext ctx(config, exec);
    try {
        std::error_code ec;
        fs::create_directories(ctx.dir, ec);
        if (ec)
            throw IoError("cannot create " + ctx.dir.string() + ": " + ec.message());
        ctx.write("config.json", config_to_json(config));
        dispatch(ctx);
        ctx.write("summary.json", ctx.summary.dump(2));
    } catch (const Error& e) {
        throw Error(e.kind(), "experiment '" + config.experiment + "': " + e.what());
    } catch (const fs::filesystem_error& e) {
        throw IoError("experiment '" + config.experiment + "': " + e.what());
    }
    for (const auto& name : ctx.files) {
        const fs::path p = ctx.dir / name;
        m.files.push_back({name, sha256_file(p), fs::file_size(p)});
    }
    m.finished_utc = utc_now();
    std::ofstream out(ctx.dir / "manifest.json");
    out << manifest_to_json(m);
    if (!out)
        throw IoError("experiment '" + config.experiment + "': cannot write manifest.json");
    return m;
}

// ------------------------------------------------------------------ report

double t95(std::size_t dof)
{
    static constexpr double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
                                       2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
                                       2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
    if (dof == 0)
        throw ContractViolation("t95: need at least one degree of freedom");
    if (dof <= 30)
        return table[dof - 1];
    if (dof <= 40)
        return 2.021;
    if (dof <= 60)
        return 2.000;
    if (dof <= 120)
        return 1.980;
    return 1.960;
}

namespace {

struct Stats {
    std::size_t n = 0;
    double mean = 0.0, sd = 0.0, lo = 0.0, hi = 0.0;
};

Stats stats_of(const std::vector<double>& v)
{
    Stats s;
    s.n = v.size();
    for (double x : v)
        s.mean += x / static_cast<double>(s.n);
    if (s.n > 1) {
        double ss = 0.0;
        for (double x : v)
            ss += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
    }
    const double half = s.n > 1 ? t95(s.n - 1) * s.sd / std::sqrt(static_cast<double>(s.n)) : 0.0;
    s.lo = s.mean - half;
    s.hi = s.mean + half;
    return s;
}

json stats_json(const Stats& s)
{
    return {{"n", s.n}, {"mean", s.mean}, {"std", s.sd}, {"ci95_low", s.lo}, {"ci95_high", s.hi}};
}

struct ExperimentGroup {
    std::vector<std::string> runs;
    std::map<std::string, std::vector<double>> metrics;
    std::map<std::size_t, std::map<std::string, std::vector<double>>> history;
};

}  // namespace

ReportResult report(const fs::path& dir)
{
    std::error_code ec;
    if (!fs::is_directory(dir, ec))
        throw IoError("report: " + dir.string() + " is not a directory");
    std::vector<fs::path> manifests;
    for (auto it = fs::recursive_directory_iterator(dir, ec); !ec && it != fs::recursive_directory_iterator();
         it.increment(ec))
        if (it->is_regular_file() && it->path().filename() == "manifest.json")
            manifests.push_back(it->path());
    if (manifests.empty())
        throw IoError("report: no manifest.json found under " + dir.string());
    std::sort(manifests.begin(), manifests.end());

    ReportResult out;
    std::map<std::string, ExperimentGroup> groups;
    json runs = json::array();
    for (const auto& mp : manifests) {
        const fs::path run_dir = mp.parent_path();
        const std::string rel = fs::relative(run_dir, dir).generic_string();
        RunManifest m;
        try {
            m = manifest_from_json(read_file(mp));
        } catch (const Error& e) {
            out.problems.push_back(mp.string() + ": corrupt manifest: " + e.what());
            continue;
        }
        std::set<std::string> ok;
        for (const auto& f : m.files) {
            const fs::path p = run_dir / f.path;
            if (!fs::exists(p)) {
                out.problems.push_back(p.string() + ": missing");
                continue;
            }
            if (sha256_file(p) != f.sha256) {
                out.problems.push_back(p.string() + ": content hash does not match the manifest");
                continue;
            }
            ok.insert(f.path);
        }
        auto& g = groups[m.config.experiment];
        g.runs.push_back(rel);
        ++out.runs;
        runs.push_back({{"dir", rel}, {"experiment", m.config.experiment}, {"seed", m.config.seed},
                        {"deterministic", m.deterministic}, {"finished_utc", m.finished_utc}});

        if (ok.count("summary.json")) {
            try {
                const json summary = json::parse(read_file(run_dir / "summary.json"));
                for (const auto& [key, value] : summary.items())
                    if (value.is_number())
                        g.metrics[key].push_back(value.get<double>());
            } catch (const json::exception& e) {
                out.problems.push_back((run_dir / "summary.json").string() + ": corrupt: " + e.what());
            }
        }
        if (ok.count("history.jsonl")) {
            std::istringstream in(read_file(run_dir / "history.jsonl"));
            std::string line;
            try {
                while (std::getline(in, line)) {
                    if (line.empty())
                        continue;
                    const json rec = json::parse(line);
                    const auto epoch = rec.at("epoch").get<std::size_t>();
                    for (const auto& [key, value] : rec.items())
                        if (key != "epoch" && value.is_number())
                            g.history[epoch][key].push_back(value.get<double>());
                }
            } catch (const json::exception& e) {
                out.problems.push_back((run_dir / "history.jsonl").string() + ": corrupt: " + e.what());
            }
        }
    }

    json j;
    j["root"] = dir.string();
    j["runs"] = runs;
    j["problems"] = out.problems;
    j["experiments"] = json::object();
    std::ostringstream csv, hcsv;
    csv.precision(17);
    hcsv.precision(17);
    csv << "experiment,metric,n,mean,std,ci95_low,ci95_high\n";
    hcsv << "experiment,epoch,field,n,mean,ci95_low,ci95_high\n";
    for (const auto& [name, g] : groups) {
        json e;
        e["n_runs"] = g.runs.size();
        e["metrics"] = json::object();
        for (const auto& [metric, values] : g.metrics) {
            const Stats s = stats_of(values);
            e["metrics"][metric] = stats_json(s);
            csv << name << ',' << metric << ',' << s.n << ',' << s.mean << ',' << s.sd << ',' << s.lo << ',' << s.hi
                << '\n';
        }
        e["history"] = json::array();
        for (const auto& [epoch, fields] : g.history) {
            json row;
            row["epoch"] = epoch;
            for (const auto& [field, values] : fields) {
                const Stats s = stats_of(values);
                row[field] = stats_json(s);
                hcsv << name << ',' << epoch << ',' << field << ',' << s.n << ',' << s.mean << ',' << s.lo << ','
                     << s.hi << '\n';
            }
            e["history"].push_back(std::move(row));
        }
        j["experiments"][name] = std::move(e);
    }

    out.json_path = dir / "report.json";
    out.csv_path = dir / "summary.csv";
    out.history_csv_path = dir / "history.csv";
    const auto dump = [](const fs::path& p, const std::string& text) {
        std::ofstream f(p, std::ios::binary);
        f << text;
        if (!f)
            throw IoError("report: cannot write " + p.string());
    };
    dump(out.json_path, j.dump(2));
    dump(out.csv_path, csv.str());
    dump(out.history_csv_path, hcsv.str());
    return out;
}

}  // namespace mmcr
