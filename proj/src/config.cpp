#include "unifix/config.hpp"

#include "unifix/archive.hpp"

#include <set>

namespace unifix {

namespace {

std::string join(const std::string& path, const std::string& key)
{
    return path.empty() ? key : path + "." + key;
}

/// Reads typed members out of one JSON object, remembering which keys were
/// consumed so leftovers can be reported.
class Section {
public:
    Section(const ojson& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            throw ConfigError("config: '" + (path_.empty() ? std::string("<root>") : path_) + "' must be an object");
    }

    void read(const char* key, int& out) { read_with(key, out, &Section::as_int); }
    void read(const char* key, double& out) { read_with(key, out, &Section::as_double); }
    void read(const char* key, bool& out) { read_with(key, out, &Section::as_bool); }
    void read(const char* key, std::string& out) { read_with(key, out, &Section::as_string); }
    void read(const char* key, std::uint64_t& out) { read_with(key, out, &Section::as_u64); }
    void read(const char* key, std::vector<int>& out) { read_with(key, out, &Section::as_int_list); }

    const ojson* child(const char* key)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    std::string path(const char* key) const { return join(path_, key); }

    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("config: unknown key '" + join(path_, it.key()) + "'");
    }

private:
    template <typename T, typename F>
    void read_with(const char* key, T& out, F convert)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        out = (this->*convert)(*it, join(path_, key));
    }

    static ConfigError mismatch(const std::string& key, const char* expected)
    {
        return ConfigError("config: '" + key + "' must be " + expected);
    }

    int as_int(const ojson& v, const std::string& key) const
    {
        if (!v.is_number_integer()) throw mismatch(key, "an integer");
        return v.get<int>();
    }
    double as_double(const ojson& v, const std::string& key) const
    {
        if (!v.is_number()) throw mismatch(key, "a number");
        return v.get<double>();
    }
    bool as_bool(const ojson& v, const std::string& key) const
    {
        if (!v.is_boolean()) throw mismatch(key, "a boolean");
        return v.get<bool>();
    }
    std::string as_string(const ojson& v, const std::string& key) const
    {
        if (!v.is_string()) throw mismatch(key, "a string");
        return v.get<std::string>();
    }
    std::uint64_t as_u64(const ojson& v, const std::string& key) const
    {
        if (v.is_number_unsigned()) return v.get<std::uint64_t>();
        if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
        throw mismatch(key, "a nonnegative integer");
    }
    std::vector<int> as_int_list(const ojson& v, const std::string& key) const
    {
        if (!v.is_array()) throw mismatch(key, "an array of integers");
        std::vector<int> out;
        for (const auto& e : v) {
            if (!e.is_number_integer()) throw mismatch(key, "an array of integers");
            out.push_back(e.get<int>());
        }
        return out;
    }

    const ojson& j_;
    std::string path_;
    std::set<std::string> seen_;
};

ojson to_json(const DatasetConfig& c)
{
    ojson j;
    j["counts"] = c.counts;
    j["corruption_fraction"] = c.corruption_fraction;
    j["unpaired_fraction"] = c.unpaired_fraction;
    j["test_fraction"] = c.test_fraction;
    j["image_size"] = c.image_size;
    return j;
}

DatasetConfig dataset_config_from_json(const ojson& j, const std::string& path)
{
    DatasetConfig c;
    Section s(j, path);
    s.read("counts", c.counts);
    s.read("corruption_fraction", c.corruption_fraction);
    s.read("unpaired_fraction", c.unpaired_fraction);
    s.read("test_fraction", c.test_fraction);
    s.read("image_size", c.image_size);
    s.finish();
    return c;
}

ojson to_json(const EvalConfig& c)
{
    ojson j;
    j["feature_dim"] = c.feature_dim;
    j["extractor_seed"] = c.extractor_seed;
    j["checkpoint"] = c.checkpoint;
    j["grid_samples"] = c.grid_samples;
    return j;
}

EvalConfig eval_config_from_json(const ojson& j, const std::string& path)
{
    EvalConfig c;
    Section s(j, path);
    s.read("feature_dim", c.feature_dim);
    s.read("extractor_seed", c.extractor_seed);
    s.read("checkpoint", c.checkpoint);
    s.read("grid_samples", c.grid_samples);
    s.finish();
    return c;
}

} // namespace

ojson to_json(const GeneratorConfig& c)
{
    ojson j;
    j["input_channels"] = c.input_channels;
    j["base_channels"] = c.base_channels;
    j["n_downsamples"] = c.n_downsamples;
    j["n_res_blocks"] = c.n_res_blocks;
    j["image_size"] = c.image_size;
    j["n_groups"] = c.n_groups;
    j["n_types"] = c.n_types;
    j["stem_kernel"] = c.stem_kernel;
    j["use_group_label"] = c.use_group_label;
    j["use_type_label"] = c.use_type_label;
    j["rescale_relevance"] = c.rescale_relevance;
    return j;
}

GeneratorConfig generator_config_from_json(const ojson& j, const std::string& path)
{
    GeneratorConfig c;
    Section s(j, path);
    s.read("input_channels", c.input_channels);
    s.read("base_channels", c.base_channels);
    s.read("n_downsamples", c.n_downsamples);
    s.read("n_res_blocks", c.n_res_blocks);
    s.read("image_size", c.image_size);
    s.read("n_groups", c.n_groups);
    s.read("n_types", c.n_types);
    s.read("stem_kernel", c.stem_kernel);
    s.read("use_group_label", c.use_group_label);
    s.read("use_type_label", c.use_type_label);
    s.read("rescale_relevance", c.rescale_relevance);
    s.finish();
    return c;
}

ojson to_json(const CriticConfig& c)
{
    ojson j;
    j["input_channels"] = c.input_channels;
    j["base_channels"] = c.base_channels;
    j["n_layers"] = c.n_layers;
    j["image_size"] = c.image_size;
    return j;
}

CriticConfig critic_config_from_json(const ojson& j, const std::string& path)
{
    CriticConfig c;
    Section s(j, path);
    s.read("input_channels", c.input_channels);
    s.read("base_channels", c.base_channels);
    s.read("n_layers", c.n_layers);
    s.read("image_size", c.image_size);
    s.finish();
    return c;
}

ojson to_json(const ModelConfig& c)
{
    ojson j;
    j["base_channels"] = c.base_channels;
    j["n_downsamples"] = c.n_downsamples;
    j["n_res_blocks"] = c.n_res_blocks;
    j["stem_kernel"] = c.stem_kernel;
    j["critic_base_channels"] = c.critic_base_channels;
    j["critic_layers"] = c.critic_layers;
    j["rescale_relevance"] = c.rescale_relevance;
    return j;
}

ModelConfig model_config_from_json(const ojson& j, const std::string& path)
{
    ModelConfig c;
    Section s(j, path);
    s.read("base_channels", c.base_channels);
    s.read("n_downsamples", c.n_downsamples);
    s.read("n_res_blocks", c.n_res_blocks);
    s.read("stem_kernel", c.stem_kernel);
    s.read("critic_base_channels", c.critic_base_channels);
    s.read("critic_layers", c.critic_layers);
    s.read("rescale_relevance", c.rescale_relevance);
    s.finish();
    return c;
}

ojson to_json(const AblationFlags& f)
{
    ojson j;
    j["use_group_label"] = f.use_group_label;
    j["use_type_label"] = f.use_type_label;
    j["use_unpaired"] = f.use_unpaired;
    return j;
}

AblationFlags ablation_from_json(const ojson& j, const std::string& path)
{
    AblationFlags f;
    Section s(j, path);
    s.read("use_group_label", f.use_group_label);
    s.read("use_type_label", f.use_type_label);
    s.read("use_unpaired", f.use_unpaired);
    s.finish();
    return f;
}

ojson to_json(const LabelVocabulary& v)
{
    ojson j;
    j["group_names"] = v.group_names;
    j["type_names"] = v.type_names;
    j["group_of_type"] = v.group_of_type;
    return j;
}

ojson to_json(const TrainingConfig& c)
{
    ojson j;
    j["epochs"] = c.epochs;
    j["fixed_lr_epochs"] = c.fixed_lr_epochs;
    j["initial_lr"] = c.initial_lr;
    j["batch_size"] = c.batch_size;
    j["lambda1"] = c.weights.lambda1;
    j["lambda2"] = c.weights.lambda2;
    j["lambda3"] = c.weights.lambda3;
    j["lambda4"] = c.weights.lambda4;
    j["use_group_label"] = c.ablation.use_group_label;
    j["use_type_label"] = c.ablation.use_type_label;
    j["use_unpaired"] = c.ablation.use_unpaired;
    j["unpaired_loss_types"] = c.unpaired_loss_types;
    j["adam_beta1"] = c.adam.beta1;
    j["adam_beta2"] = c.adam.beta2;
    j["adam_eps"] = c.adam.eps;
    j["checkpoint_every"] = c.checkpoint_every;
    return j;
}

TrainingConfig training_config_from_json(const ojson& j, const std::string& path)
{
    TrainingConfig c;
    Section s(j, path);
    s.read("epochs", c.epochs);
    s.read("fixed_lr_epochs", c.fixed_lr_epochs);
    s.read("initial_lr", c.initial_lr);
    s.read("batch_size", c.batch_size);
    s.read("lambda1", c.weights.lambda1);
    s.read("lambda2", c.weights.lambda2);
    s.read("lambda3", c.weights.lambda3);
    s.read("lambda4", c.weights.lambda4);
    s.read("use_group_label", c.ablation.use_group_label);
    s.read("use_type_label", c.ablation.use_type_label);
    s.read("use_unpaired", c.ablation.use_unpaired);
    s.read("unpaired_loss_types", c.unpaired_loss_types);
    s.read("adam_beta1", c.adam.beta1);
    s.read("adam_beta2", c.adam.beta2);
    s.read("adam_eps", c.adam.eps);
    s.read("checkpoint_every", c.checkpoint_every);
    s.finish();
    return c;
}

void RunConfig::resolve()
{
    data.seed = seed;
    train.seed = seed;
    if (run_dir.empty()) throw ConfigError("config: 'run_dir' must not be empty");
    data.validate();
    train.validate();
    if (eval.feature_dim <= 0) throw ConfigError("config: 'eval.feature_dim' must be positive");
    if (eval.grid_samples <= 0) throw ConfigError("config: 'eval.grid_samples' must be positive");
    if (eval.checkpoint.empty()) throw ConfigError("config: 'eval.checkpoint' must not be empty");
}

RunConfig parse_config_text(const std::string& text)
{
    ojson j;
    try {
        j = text.find_first_not_of(" \t\r\n") == std::string::npos ? ojson::object() : ojson::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
    RunConfig c;
    Section s(j, "");
    std::string run_dir = c.run_dir.string();
    s.read("run_dir", run_dir);
    c.run_dir = run_dir;
    s.read("seed", c.seed);
    if (const ojson* d = s.child("data")) c.data = dataset_config_from_json(*d, "data");
    if (const ojson* m = s.child("model")) c.model = model_config_from_json(*m, "model");
    if (const ojson* t = s.child("train")) c.train = training_config_from_json(*t, "train");
    if (const ojson* e = s.child("eval")) c.eval = eval_config_from_json(*e, "eval");
    s.finish();
    c.resolve();
    return c;
}

RunConfig parse_config(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path)) throw ConfigError("config: file not found: " + path.string());
    return parse_config_text(read_text_file(path));
}

std::string serialize_config(const RunConfig& config)
{
    ojson j;
    j["run_dir"] = config.run_dir.string();
    j["seed"] = config.seed;
    j["data"] = to_json(config.data);
    j["model"] = to_json(config.model);
    j["train"] = to_json(config.train);
    j["eval"] = to_json(config.eval);
    return j.dump(2) + "\n";
}

} // namespace unifix
