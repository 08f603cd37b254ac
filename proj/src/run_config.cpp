#include "coughlab/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "coughlab/util.hpp"

namespace coughlab::runcfg {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': '" + value + "' is not a number");
    }
}

long long parse_int(const std::string& key, const std::string& value) {
    long long v = 0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size())
        throw ConfigError("config key '" + key + "': '" + value + "' is not an integer");
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config key '" + key + "': '" + value + "' is not a boolean");
}

}  // namespace

void apply_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "jobs") cfg.jobs = parse_int(key, value);
    else if (key == "audio.target_rate") cfg.conditioning.target_rate = static_cast<int>(parse_int(key, value));
    else if (key == "audio.normalize_peak") cfg.conditioning.normalize_peak = parse_bool(key, value);
    else if (key == "frame.length_s") cfg.frame.frame_len_s = parse_double(key, value);
    else if (key == "frame.hop_s") cfg.frame.hop_len_s = parse_double(key, value);
    else if (key == "frame.fft_size") cfg.frame.fft_size = parse_int(key, value);
    else if (key == "mfcc.coefficients") cfg.mfcc.n_mfcc = parse_int(key, value);
    else if (key == "mfcc.mel_filters") cfg.mfcc.n_mels = parse_int(key, value);
    else if (key == "mfcc.fmin_hz") cfg.mfcc.fmin = parse_double(key, value);
    else if (key == "mfcc.fmax_hz") cfg.mfcc.fmax = parse_double(key, value);
    else if (key == "mfcc.delta_window") cfg.mfcc.delta_window = parse_int(key, value);
    else if (key == "mfcc.include_c0") cfg.mfcc.include_c0 = parse_bool(key, value);
    else if (key == "net.hidden_units") cfg.network.hidden_units = parse_int(key, value);
    else if (key == "net.bilstm_layers") cfg.network.num_bilstm_layers = parse_int(key, value);
    else if (key == "net.dropout") cfg.network.dropout_rate = parse_double(key, value);
    else if (key == "net.standardize") cfg.network.standardize = parse_bool(key, value);
    else if (key == "train.learning_rate") cfg.training.learning_rate = parse_double(key, value);
    else if (key == "train.batch_size") cfg.training.batch_size = parse_int(key, value);
    else if (key == "train.max_epochs") cfg.training.max_epochs = parse_int(key, value);
    else if (key == "train.optimizer") {
        if (value == "adam") cfg.training.optimizer = net::Optimizer::adam;
        else if (value == "sgd") cfg.training.optimizer = net::Optimizer::sgd;
        else throw ConfigError("config key 'train.optimizer': expected adam or sgd, got '" + value + "'");
    } else if (key == "train.beta1") cfg.training.adam_beta1 = parse_double(key, value);
    else if (key == "train.beta2") cfg.training.adam_beta2 = parse_double(key, value);
    else if (key == "train.epsilon") cfg.training.adam_epsilon = parse_double(key, value);
    else if (key == "train.clip_norm") cfg.training.gradient_clip_norm = parse_double(key, value);
    else if (key == "train.patience") cfg.training.early_stop_patience = parse_int(key, value);
    else if (key == "split.train_fraction") cfg.train_fraction = parse_double(key, value);
    else if (key == "split.val_fraction") cfg.val_fraction = parse_double(key, value);
    else if (key == "pca.samples_per_class") cfg.pca_samples_per_class = parse_int(key, value);
    else if (key == "spectral.bins") cfg.spectral_bins = parse_int(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
}

void apply_file(RunConfig& cfg, const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        try {
            apply_kv(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
}

std::string render(const RunConfig& cfg) {
    std::ostringstream os;
    const auto d = [](double v) { return util::format_double(v); };
    os << "# resolved run configuration\n";
    os << "seed = " << cfg.seed << "\n";
    os << "jobs = " << cfg.jobs << "\n";
    os << "\n# audio conditioning\n";
    os << "audio.target_rate = " << cfg.conditioning.target_rate << "\n";
    os << "audio.normalize_peak = " << (cfg.conditioning.normalize_peak ? "true" : "false") << "\n";
    os << "\n# framing and features\n";
    os << "frame.length_s = " << d(cfg.frame.frame_len_s) << "\n";
    os << "frame.hop_s = " << d(cfg.frame.hop_len_s) << "\n";
    os << "frame.fft_size = " << cfg.frame.fft_size << "\n";
    os << "mfcc.coefficients = " << cfg.mfcc.n_mfcc << "\n";
    os << "mfcc.mel_filters = " << cfg.mfcc.n_mels << "\n";
    os << "mfcc.fmin_hz = " << d(cfg.mfcc.fmin) << "\n";
    os << "mfcc.fmax_hz = " << d(cfg.mfcc.fmax) << "\n";
    os << "mfcc.delta_window = " << cfg.mfcc.delta_window << "\n";
    os << "mfcc.include_c0 = " << (cfg.mfcc.include_c0 ? "true" : "false") << "\n";
    os << "\n# network\n";
    os << "net.hidden_units = " << cfg.network.hidden_units << "\n";
    os << "net.bilstm_layers = " << cfg.network.num_bilstm_layers << "\n";
    os << "net.dropout = " << d(cfg.network.dropout_rate) << "\n";
    os << "net.standardize = " << (cfg.network.standardize ? "true" : "false") << "\n";
    os << "\n# training\n";
    os << "train.learning_rate = " << d(cfg.training.learning_rate) << "\n";
    os << "train.batch_size = " << cfg.training.batch_size << "\n";
    os << "train.max_epochs = " << cfg.training.max_epochs << "\n";
    os << "train.optimizer = " << (cfg.training.optimizer == net::Optimizer::adam ? "adam" : "sgd")
       << "\n";
    os << "train.beta1 = " << d(cfg.training.adam_beta1) << "\n";
    os << "train.beta2 = " << d(cfg.training.adam_beta2) << "\n";
    os << "train.epsilon = " << d(cfg.training.adam_epsilon) << "\n";
    os << "train.clip_norm = " << d(cfg.training.gradient_clip_norm) << "\n";
    os << "train.patience = " << cfg.training.early_stop_patience << "\n";
    os << "\n# dataset split\n";
    os << "split.train_fraction = " << d(cfg.train_fraction) << "\n";
    os << "split.val_fraction = " << d(cfg.val_fraction) << "\n";
    os << "\n# analysis\n";
    os << "pca.samples_per_class = " << cfg.pca_samples_per_class << "\n";
    os << "spectral.bins = " << cfg.spectral_bins << "\n";
    return os.str();
}

void echo_config(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const auto path = out_dir / "resolved_config.txt";
    std::ofstream os(path);
    if (!os) throw DataError("cannot create " + path.string());
    os << render(cfg);
    if (!os) throw DataError("failed writing " + path.string());
}

container::Json pipeline_to_json(const features::PipelineConfig& pipeline) {
    return container::Json{
        {"audio",
         {{"target_rate", pipeline.conditioning.target_rate},
          {"normalize_peak", pipeline.conditioning.normalize_peak}}},
        {"frame",
         {{"length_s", pipeline.frame.frame_len_s},
          {"hop_s", pipeline.frame.hop_len_s},
          {"fft_size", pipeline.frame.fft_size}}},
        {"mfcc",
         {{"coefficients", pipeline.mfcc.n_mfcc},
          {"mel_filters", pipeline.mfcc.n_mels},
          {"fmin_hz", pipeline.mfcc.fmin},
          {"fmax_hz", pipeline.mfcc.fmax},
          {"delta_window", pipeline.mfcc.delta_window},
          {"include_c0", pipeline.mfcc.include_c0}}}};
}

features::PipelineConfig pipeline_from_json(const container::Json& j) {
    try {
        features::PipelineConfig p;
        p.conditioning.target_rate = j.at("audio").at("target_rate").get<int>();
        p.conditioning.normalize_peak = j.at("audio").at("normalize_peak").get<bool>();
        p.frame.frame_len_s = j.at("frame").at("length_s").get<double>();
        p.frame.hop_len_s = j.at("frame").at("hop_s").get<double>();
        p.frame.fft_size = j.at("frame").at("fft_size").get<Index>();
        p.mfcc.n_mfcc = j.at("mfcc").at("coefficients").get<Index>();
        p.mfcc.n_mels = j.at("mfcc").at("mel_filters").get<Index>();
        p.mfcc.fmin = j.at("mfcc").at("fmin_hz").get<double>();
        p.mfcc.fmax = j.at("mfcc").at("fmax_hz").get<double>();
        p.mfcc.delta_window = j.at("mfcc").at("delta_window").get<Index>();
        p.mfcc.include_c0 = j.at("mfcc").at("include_c0").get<bool>();
        return p;
    } catch (const container::Json::exception& e) {
        throw DataError("malformed pipeline block: " + std::string(e.what()));
    }
}

}  // namespace coughlab::runcfg
