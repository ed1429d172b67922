#include "flowlab/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace flowlab {

namespace {

struct Value {
    enum class Kind { number, boolean, string, list } kind = Kind::number;
    double num = 0.0;
    bool b = false;
    std::string str;
    std::vector<Value> list;
};

struct Parser {
    std::string_view text;
    std::size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
    }

    Value parse_value() {
        skip_ws();
        if (pos >= text.size()) throw ConfigError("config: missing value");
        const char c = text[pos];
        if (c == '[') return parse_list();
        if (c == '"') return parse_string();
        return parse_scalar();
    }

    Value parse_list() {
        ++pos;  // '['
        Value v;
        v.kind = Value::Kind::list;
        skip_ws();
        if (pos < text.size() && text[pos] == ']') {
            ++pos;
            return v;
        }
        while (true) {
            v.list.push_back(parse_value());
            skip_ws();
            if (pos < text.size() && text[pos] == ',') {
                ++pos;
                continue;
            }
            if (pos < text.size() && text[pos] == ']') {
                ++pos;
                return v;
            }
            throw ConfigError("config: malformed list");
        }
    }

    Value parse_string() {
        ++pos;  // '"'
        Value v;
        v.kind = Value::Kind::string;
        while (pos < text.size() && text[pos] != '"') v.str.push_back(text[pos++]);
        if (pos >= text.size()) throw ConfigError("config: unterminated string");
        ++pos;
        return v;
    }

    Value parse_scalar() {
        std::size_t start = pos;
        while (pos < text.size() && text[pos] != ',' && text[pos] != ']' && text[pos] != ' ' &&
               text[pos] != '\t') {
            ++pos;
        }
        std::string tok(text.substr(start, pos - start));
        Value v;
        if (tok == "true" || tok == "false") {
            v.kind = Value::Kind::boolean;
            v.b = (tok == "true");
            return v;
        }
        try {
            std::size_t used = 0;
            v.num = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ConfigError("config: cannot parse value '" + tok + "'");
        }
        return v;
    }
};

Value parse_value_text(const std::string& s) {
    Parser p{s, 0};
    Value v = p.parse_value();
    p.skip_ws();
    if (p.pos != s.size()) throw ConfigError("config: trailing characters after value '" + s + "'");
    return v;
}

double as_number(const Value& v, const std::string& key) {
    if (v.kind != Value::Kind::number) throw ConfigError("config: key '" + key + "' expects a number");
    return v.num;
}

std::string as_string(const Value& v, const std::string& key) {
    if (v.kind != Value::Kind::string) throw ConfigError("config: key '" + key + "' expects a string");
    return v.str;
}

std::vector<double> as_number_list(const Value& v, const std::string& key) {
    if (v.kind != Value::Kind::list) throw ConfigError("config: key '" + key + "' expects a list");
    std::vector<double> out;
    for (const auto& e : v.list) out.push_back(as_number(e, key));
    return out;
}

std::vector<std::vector<double>> as_nested_list(const Value& v, const std::string& key) {
    if (v.kind != Value::Kind::list) throw ConfigError("config: key '" + key + "' expects a list");
    std::vector<std::vector<double>> out;
    for (const auto& e : v.list) out.push_back(as_number_list(e, key));
    return out;
}

std::vector<int> as_int_list(const Value& v, const std::string& key) {
    std::vector<int> out;
    for (double d : as_number_list(v, key)) out.push_back(static_cast<int>(d));
    return out;
}

using Setter = std::function<void(ExperimentConfig&, const Value&)>;

void bind_sampler(TimestepSampler& s, const std::string& key, const Value& v,
                  const std::string& field) {
    if (field == "kind") s.kind = timestep_kind_from_string(as_string(v, key));
    else if (field == "p_mean") s.p_mean = as_number(v, key);
    else if (field == "p_std") s.p_std = as_number(v, key);
}

void bind_ta(TaConfig& ta, const std::string& key, const Value& v, const std::string& field) {
    if (field == "beta") ta.beta = as_number(v, key);
    else if (field == "lambda_rf") ta.lambda_rf = as_number(v, key);
    else if (field == "steps_w") ta.steps_w = static_cast<int>(as_number(v, key));
    else if (field == "steps_l") ta.steps_l = static_cast<int>(as_number(v, key));
    else if (field == "dataset_size") ta.dataset_size = static_cast<std::int64_t>(as_number(v, key));
    else if (field == "lr") ta.lr = as_number(v, key);
    else if (field == "iters") ta.iters = static_cast<std::int64_t>(as_number(v, key));
    else if (field == "batch_size") ta.batch_size = static_cast<int>(as_number(v, key));
}

const std::map<std::string, Setter>& schema() {
    static const std::map<std::string, Setter> s = [] {
        std::map<std::string, Setter> m;
        auto num = [](auto member) {
            return [member](ExperimentConfig& c, const Value& v) {
                std::invoke(member, c) = as_number(v, "");
            };
        };
        (void)num;
        m["run.version"] = [](ExperimentConfig& c, const Value& v) {
            c.version = static_cast<int>(as_number(v, "run.version"));
        };
        m["run.seed"] = [](ExperimentConfig& c, const Value& v) {
            c.seed = static_cast<std::uint64_t>(as_number(v, "run.seed"));
        };
        m["run.output_dir"] = [](ExperimentConfig& c, const Value& v) {
            c.output_dir = as_string(v, "run.output_dir");
        };

        m["dataset.kind"] = [](ExperimentConfig& c, const Value& v) {
            c.dataset.kind = dataset_kind_from_string(as_string(v, "dataset.kind"));
        };
        m["dataset.frames"] = [](ExperimentConfig& c, const Value& v) {
            c.dataset.frames = static_cast<int>(as_number(v, "dataset.frames"));
        };
        m["dataset.dim"] = [](ExperimentConfig& c, const Value& v) {
            c.dataset.dim = static_cast<int>(as_number(v, "dataset.dim"));
        };
        m["dataset.means"] = [](ExperimentConfig& c, const Value& v) {
            c.dataset.means = as_nested_list(v, "dataset.means");
        };
        m["dataset.scales"] = [](ExperimentConfig& c, const Value& v) {
            c.dataset.scales = as_number_list(v, "dataset.scales");
        };
        m["dataset.weights"] = [](ExperimentConfig& c, const Value& v) {
            c.dataset.weights = as_number_list(v, "dataset.weights");
        };
        m["dataset.drift"] = [](ExperimentConfig& c, const Value& v) {
            c.dataset.drift = as_number_list(v, "dataset.drift");
        };
        m["dataset.seed"] = [](ExperimentConfig& c, const Value& v) {
            c.dataset.seed = static_cast<std::uint64_t>(as_number(v, "dataset.seed"));
        };

        m["net.width"] = [](ExperimentConfig& c, const Value& v) {
            c.net.width = static_cast<int>(as_number(v, "net.width"));
        };
        m["net.n_blocks"] = [](ExperimentConfig& c, const Value& v) {
            c.net.n_blocks = static_cast<int>(as_number(v, "net.n_blocks"));
        };

        m["teacher.iters"] = [](ExperimentConfig& c, const Value& v) {
            c.teacher.iters = static_cast<std::int64_t>(as_number(v, "teacher.iters"));
        };
        m["teacher.lr"] = [](ExperimentConfig& c, const Value& v) {
            c.teacher.lr = as_number(v, "teacher.lr");
        };
        m["teacher.batch_size"] = [](ExperimentConfig& c, const Value& v) {
            c.teacher.batch_size = static_cast<int>(as_number(v, "teacher.batch_size"));
        };
        m["teacher.sampler_kind"] = [](ExperimentConfig& c, const Value& v) {
            bind_sampler(c.teacher.sampler, "teacher.sampler_kind", v, "kind");
        };
        m["teacher.sampler_p_mean"] = [](ExperimentConfig& c, const Value& v) {
            bind_sampler(c.teacher.sampler, "teacher.sampler_p_mean", v, "p_mean");
        };
        m["teacher.sampler_p_std"] = [](ExperimentConfig& c, const Value& v) {
            bind_sampler(c.teacher.sampler, "teacher.sampler_p_std", v, "p_std");
        };

        m["ccd.warmup_h"] = [](ExperimentConfig& c, const Value& v) {
            c.ccd.warmup_h = static_cast<std::int64_t>(as_number(v, "ccd.warmup_h"));
        };
        m["ccd.ema_mu"] = [](ExperimentConfig& c, const Value& v) {
            c.ccd.ema_mu = as_number(v, "ccd.ema_mu");
        };
        m["ccd.norm_c"] = [](ExperimentConfig& c, const Value& v) {
            c.ccd.norm_c = as_number(v, "ccd.norm_c");
        };
        m["ccd.lr"] = [](ExperimentConfig& c, const Value& v) {
            c.ccd.lr = as_number(v, "ccd.lr");
        };
        m["ccd.total_iters"] = [](ExperimentConfig& c, const Value& v) {
            c.ccd.total_iters = static_cast<std::int64_t>(as_number(v, "ccd.total_iters"));
        };
        m["ccd.batch_size"] = [](ExperimentConfig& c, const Value& v) {
            c.ccd.batch_size = static_cast<int>(as_number(v, "ccd.batch_size"));
        };
        m["ccd.sampler_kind"] = [](ExperimentConfig& c, const Value& v) {
            bind_sampler(c.ccd.sampler, "ccd.sampler_kind", v, "kind");
        };
        m["ccd.sampler_p_mean"] = [](ExperimentConfig& c, const Value& v) {
            bind_sampler(c.ccd.sampler, "ccd.sampler_p_mean", v, "p_mean");
        };
        m["ccd.sampler_p_std"] = [](ExperimentConfig& c, const Value& v) {
            bind_sampler(c.ccd.sampler, "ccd.sampler_p_std", v, "p_std");
        };
        m["ccd.dcd_delta_t"] = [](ExperimentConfig& c, const Value& v) {
            c.dcd_delta_t = as_number(v, "ccd.dcd_delta_t");
        };

        m["da.lambda_adv"] = [](ExperimentConfig& c, const Value& v) {
            c.da.lambda_adv = as_number(v, "da.lambda_adv");
        };
        m["da.n_warmup"] = [](ExperimentConfig& c, const Value& v) {
            c.da.n_warmup = static_cast<std::int64_t>(as_number(v, "da.n_warmup"));
        };
        m["da.disc_lr"] = [](ExperimentConfig& c, const Value& v) {
            c.da.disc_lr = as_number(v, "da.disc_lr");
        };

        for (const std::string sec : {"ta", "ta2"}) {
            for (const std::string f : {"beta", "lambda_rf", "steps_w", "steps_l", "dataset_size",
                                        "lr", "iters", "batch_size"}) {
                m[sec + "." + f] = [sec, f](ExperimentConfig& c, const Value& v) {
                    bind_ta(sec == "ta" ? c.ta : c.ta2, sec + "." + f, v, f);
                };
            }
        }

        m["eval.steps_list"] = [](ExperimentConfig& c, const Value& v) {
            c.eval.steps_list = as_int_list(v, "eval.steps_list");
        };
        m["eval.n_samples"] = [](ExperimentConfig& c, const Value& v) {
            c.eval.n_samples = static_cast<std::size_t>(as_number(v, "eval.n_samples"));
        };
        m["eval.n_real"] = [](ExperimentConfig& c, const Value& v) {
            c.eval.n_real = static_cast<std::size_t>(as_number(v, "eval.n_real"));
        };
        m["eval.n_trajectories"] = [](ExperimentConfig& c, const Value& v) {
            c.eval.n_trajectories = static_cast<std::size_t>(as_number(v, "eval.n_trajectories"));
        };
        m["eval.defect_t1"] = [](ExperimentConfig& c, const Value& v) {
            c.eval.defect_t1 = as_number(v, "eval.defect_t1");
        };
        m["eval.defect_t2"] = [](ExperimentConfig& c, const Value& v) {
            c.eval.defect_t2 = as_number(v, "eval.defect_t2");
        };
        return m;
    }();
    return s;
}

}  // namespace

ExperimentConfig default_config() {
    ExperimentConfig c;
    c.dataset.kind = DatasetKind::gaussian_mixture;
    c.dataset.frames = 8;
    c.dataset.dim = 4;
    c.dataset.means = {{1.5, 0.0, 0.0, 0.0}, {-1.5, 1.0, 0.0, 1.0}, {0.0, -1.5, 1.5, -1.0}};
    c.dataset.scales = {0.4, 0.4, 0.4};
    c.dataset.weights = {0.4, 0.3, 0.3};
    c.dataset.drift = {0.05, -0.05, 0.05, 0.0};
    c.dataset.seed = 1234;

    c.teacher.iters = 12000;
    c.teacher.lr = 1e-3;

    c.ccd.warmup_h = 1000;
    c.ccd.ema_mu = 0.95;
    c.ccd.norm_c = 0.1;
    c.ccd.lr = 3e-4;
    c.ccd.total_iters = 3000;
    c.ccd.sampler = TimestepSampler{TimestepKind::logit_normal, -0.6, 1.4};

    c.da.lambda_adv = 0.01;
    c.da.n_warmup = 1000;
    c.da.disc_lr = 1e-3;

    c.ta.beta = 2500.0;
    c.ta.lambda_rf = 2.0;
    c.ta.steps_w = 8;
    c.ta.steps_l = 4;
    c.ta.dataset_size = 2000;
    c.ta.lr = 1e-4;
    c.ta.iters = 2000;

    c.ta2 = c.ta;
    c.ta2.steps_w = 4;
    c.ta2.steps_l = 2;
    return c;
}

NetConfig ExperimentConfig::net_config() const {
    NetConfig n;
    n.dim_in = dataset.frames * dataset.dim;
    n.dim_cond = dataset.dim;
    n.width = net.width;
    n.n_blocks = net.n_blocks;
    return n;
}

void ExperimentConfig::validate() const {
    if (version != kConfigVersion) {
        throw ConfigError("config: version " + std::to_string(version) +
                          " does not match tool version " + std::to_string(kConfigVersion));
    }
    try {
        dataset.validate();
        ccd.validate();
        da.validate();
        ta.validate();
        ta2.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (teacher.iters <= 0 || teacher.lr <= 0.0 || teacher.batch_size <= 0) {
        throw ConfigError("config: invalid teacher section");
    }
    if (dcd_delta_t <= 0.0 || dcd_delta_t >= 1.0) {
        throw ConfigError("config: ccd.dcd_delta_t must lie in (0,1)");
    }
    if (eval.steps_list.empty()) throw ConfigError("config: eval.steps_list must be non-empty");
    for (std::size_t i = 1; i < eval.steps_list.size(); ++i) {
        if (eval.steps_list[i] <= eval.steps_list[i - 1]) {
            throw ConfigError("config: eval.steps_list must be ascending");
        }
    }
    if (dataset.frames < 2) {
        throw ConfigError("config: dataset.frames must be >= 2 for temporal heads");
    }
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg = default_config();
    std::istringstream is(text);
    std::string line;
    std::string section = "run";
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        // trim
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("config: bad section header at line " +
                                                      std::to_string(lineno));
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: expected key = value at line " + std::to_string(lineno));
        }
        std::string key = line.substr(0, eq);
        key.erase(key.find_last_not_of(" \t") + 1);
        std::string valstr = line.substr(eq + 1);
        valstr.erase(0, valstr.find_first_not_of(" \t"));

        const std::string full = section + "." + key;
        auto it = schema().find(full);
        if (it == schema().end()) throw ConfigError("config: unknown key '" + full + "'");
        it->second(cfg, parse_value_text(valstr));
    }

    // Environment overrides: FLOWLAB_<SECTION>_<KEY>.
    for (const auto& [full, setter] : schema()) {
        std::string env = "FLOWLAB_";
        for (char c : full) env.push_back(c == '.' ? '_' : static_cast<char>(std::toupper(c)));
        if (const char* v = std::getenv(env.c_str())) {
            setter(cfg, parse_value_text(v));
        }
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str());
}

std::string config_schema_text() {
    const ExperimentConfig c = default_config();
    std::ostringstream os;
    os.precision(17);
    auto list = [](const std::vector<double>& v) {
        std::ostringstream s;
        s << "[";
        for (std::size_t i = 0; i < v.size(); ++i) s << (i ? ", " : "") << v[i];
        s << "]";
        return s.str();
    };
    os << "[run]\n";
    os << "version = " << c.version << "\n";
    os << "seed = " << c.seed << "\n";
    os << "output_dir = \"" << c.output_dir << "\"\n\n";
    os << "[dataset]\n";
    os << "kind = \"" << to_string(c.dataset.kind) << "\"\n";
    os << "frames = " << c.dataset.frames << "\n";
    os << "dim = " << c.dataset.dim << "\n";
    os << "means = [";
    for (std::size_t i = 0; i < c.dataset.means.size(); ++i) {
        os << (i ? ", " : "") << list(c.dataset.means[i]);
    }
    os << "]\n";
    os << "scales = " << list(c.dataset.scales) << "\n";
    os << "weights = " << list(c.dataset.weights) << "\n";
    os << "drift = " << list(c.dataset.drift) << "\n";
    os << "seed = " << c.dataset.seed << "\n\n";
    os << "[net]\n";
    os << "width = " << c.net.width << "\n";
    os << "n_blocks = " << c.net.n_blocks << "\n\n";
    os << "[teacher]\n";
    os << "iters = " << c.teacher.iters << "\n";
    os << "lr = " << c.teacher.lr << "\n";
    os << "batch_size = " << c.teacher.batch_size << "\n";
    os << "sampler_kind = \"uniform\"\n\n";
    os << "[ccd]\n";
    os << "warmup_h = " << c.ccd.warmup_h << "\n";
    os << "ema_mu = " << c.ccd.ema_mu << "\n";
    os << "norm_c = " << c.ccd.norm_c << "\n";
    os << "lr = " << c.ccd.lr << "\n";
    os << "total_iters = " << c.ccd.total_iters << "\n";
    os << "batch_size = " << c.ccd.batch_size << "\n";
    os << "sampler_kind = \"logit_normal\"\n";
    os << "sampler_p_mean = " << c.ccd.sampler.p_mean << "\n";
    os << "sampler_p_std = " << c.ccd.sampler.p_std << "\n";
    os << "dcd_delta_t = " << c.dcd_delta_t << "\n\n";
    os << "[da]\n";
    os << "lambda_adv = " << c.da.lambda_adv << "\n";
    os << "n_warmup = " << c.da.n_warmup << "\n";
    os << "disc_lr = " << c.da.disc_lr << "\n\n";
    for (const auto* ta : {&c.ta, &c.ta2}) {
        os << (ta == &c.ta ? "[ta]\n" : "[ta2]\n");
        os << "beta = " << ta->beta << "\n";
        os << "lambda_rf = " << ta->lambda_rf << "\n";
        os << "steps_w = " << ta->steps_w << "\n";
        os << "steps_l = " << ta->steps_l << "\n";
        os << "dataset_size = " << ta->dataset_size << "\n";
        os << "lr = " << ta->lr << "\n";
        os << "iters = " << ta->iters << "\n";
        os << "batch_size = " << ta->batch_size << "\n\n";
    }
    os << "[eval]\n";
    os << "steps_list = [";
    for (std::size_t i = 0; i < c.eval.steps_list.size(); ++i) {
        os << (i ? ", " : "") << c.eval.steps_list[i];
    }
    os << "]\n";
    os << "n_samples = " << c.eval.n_samples << "\n";
    os << "n_real = " << c.eval.n_real << "\n";
    os << "n_trajectories = " << c.eval.n_trajectories << "\n";
    os << "defect_t1 = " << c.eval.defect_t1 << "\n";
    os << "defect_t2 = " << c.eval.defect_t2 << "\n";
    return os.str();
}

}  // namespace flowlab
