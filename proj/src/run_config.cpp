#include "arprl/run_config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "arprl/nn.hpp"

namespace arprl {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

int parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const int out = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "' expects an integer, got '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const unsigned long long out = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return static_cast<std::uint64_t>(out);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "' expects an unsigned integer, got '" +
                                    v + "'");
    }
}

double parse_f64(const std::string& v, const std::string& key) {
    try {
        return parse_double(v);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "' expects a float, got '" + v + "'");
    }
}

} // namespace

void apply_run_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
    std::istringstream is(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = line.substr(1, line.size() - 2);
            if (section != "data" && section != "model" && section != "train" &&
                section != "attack" && section != "eval")
                throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                            ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                        ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty())
            throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                        ": key '" + key + "' outside any section");

        auto unknown = [&]() -> std::invalid_argument {
            return std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                         ": unknown key '" + key + "' in section [" + section + "]");
        };
        if (section == "data") {
            if (key == "kind") cfg.data_kind = value;
            else if (key == "path") cfg.data_path = value;
            else if (key == "n") cfg.data_n = parse_int(value, key);
            else if (key == "seed") cfg.data_seed = parse_u64(value, key);
            else throw unknown();
        } else if (section == "model") {
            if (key == "lambda") cfg.lambda = parse_f64(value, key);
            else throw unknown();
        } else if (section == "train") {
            TrainConfig& t = cfg.train;
            if (key == "alpha") t.alpha = parse_f64(value, key);
            else if (key == "beta") t.beta = parse_f64(value, key);
            else if (key == "epsilon") t.epsilon = parse_f64(value, key);
            else if (key == "lr1") t.lr1 = parse_f64(value, key);
            else if (key == "lr2") t.lr2 = parse_f64(value, key);
            else if (key == "lr3") t.lr3 = parse_f64(value, key);
            else if (key == "lr4") t.lr4 = parse_f64(value, key);
            else if (key == "lr5") t.lr5 = parse_f64(value, key);
            else if (key == "batch_size") t.batch_size = parse_int(value, key);
            else if (key == "global_epochs") t.global_epochs = parse_int(value, key);
            else if (key == "local_steps") t.local_steps = parse_int(value, key);
            else if (key == "outer_rounds") t.outer_rounds = parse_int(value, key);
            else if (key == "seed") t.seed = parse_u64(value, key);
            else if (key == "clip_norm") t.clip_norm = parse_f64(value, key);
            else throw unknown();
        } else if (section == "attack") {
            if (key == "epsilon") cfg.attack.epsilon = parse_f64(value, key);
            else if (key == "steps") {
                cfg.attack.steps = parse_int(value, key);
                cfg.train.pgd_steps = cfg.attack.steps;
            } else if (key == "step_fraction") {
                cfg.attack.step_fraction = parse_f64(value, key);
                cfg.train.pgd_step_fraction = cfg.attack.step_fraction;
            } else throw unknown();
        } else { // eval
            if (key == "bounds") cfg.eval_bounds = parse_bool(value, key);
            else if (key == "estimator_steps") cfg.estimator_steps = parse_int(value, key);
            else if (key == "projection") cfg.export_projection = parse_bool(value, key);
            else throw unknown();
        }
    }
    cfg.train.lambda = cfg.lambda;
    cfg.train.validate();
    cfg.attack.validate();
}

RunConfig parse_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("cannot open config file: " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    RunConfig cfg;
    apply_run_config_text(cfg, buf.str(), path);
    return cfg;
}

std::string render_run_config(const RunConfig& cfg) {
    std::ostringstream os;
    os << "[data]\n"
       << "kind = " << cfg.data_kind << "\n";
    if (!cfg.data_path.empty()) os << "path = " << cfg.data_path << "\n";
    os << "n = " << cfg.data_n << "\n"
       << "seed = " << cfg.data_seed << "\n\n";
    os << "[model]\n"
       << "lambda = " << format_double(cfg.lambda) << "\n\n";
    const TrainConfig& t = cfg.train;
    os << "[train]\n"
       << "alpha = " << format_double(t.alpha) << "\n"
       << "beta = " << format_double(t.beta) << "\n"
       << "epsilon = " << format_double(t.epsilon) << "\n"
       << "lr1 = " << format_double(t.lr1) << "\n"
       << "lr2 = " << format_double(t.lr2) << "\n"
       << "lr3 = " << format_double(t.lr3) << "\n"
       << "lr4 = " << format_double(t.lr4) << "\n"
       << "lr5 = " << format_double(t.lr5) << "\n"
       << "batch_size = " << t.batch_size << "\n"
       << "global_epochs = " << t.global_epochs << "\n"
       << "local_steps = " << t.local_steps << "\n"
       << "outer_rounds = " << t.outer_rounds << "\n"
       << "seed = " << t.seed << "\n"
       << "clip_norm = " << format_double(t.clip_norm) << "\n\n";
    os << "[attack]\n"
       << "epsilon = " << format_double(cfg.attack.epsilon) << "\n"
       << "steps = " << cfg.attack.steps << "\n"
       << "step_fraction = " << format_double(cfg.attack.step_fraction) << "\n\n";
    os << "[eval]\n"
       << "bounds = " << (cfg.eval_bounds ? "true" : "false") << "\n"
       << "estimator_steps = " << cfg.estimator_steps << "\n"
       << "projection = " << (cfg.export_projection ? "true" : "false") << "\n";
    return os.str();
}

void write_resolved_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << render_run_config(cfg);
}

} // namespace arprl
