#include "snf/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "snf/io.hpp"

namespace snf {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys()
{
    static const std::map<std::string, std::set<std::string>> keys = {
        {"model",
         {"variant", "n_x", "n_u", "n_y", "energy_layers", "head", "data_dependent", "alpha_init", "wA_init", "S",
          "train_S", "train_hu", "train_hy", "seed"}},
        {"solver", {"atol", "rtol", "max_steps"}},
        {"loss", {"kind", "gamma"}},
        {"train", {"eta", "epochs", "mode"}},
        {"data", {"dataset", "n", "noise", "seed", "test_fraction"}},
    };
    return keys;
}

// Typed access to one section with "section.key" diagnostics.
class Section {
public:
    Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

    std::string str(const std::string& key, const std::string& fallback) const
    {
        if (tree_ == nullptr) {
            return fallback;
        }
        auto v = tree_->get_optional<std::string>(key);
        return v ? trim(*v) : fallback;
    }

    double num(const std::string& key, double fallback) const
    {
        const std::string s = str(key, "");
        if (s.empty()) {
            return fallback;
        }
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &pos);
        } catch (const std::exception&) {
            bad(key, "a number", s);
        }
        if (pos != s.size()) {
            bad(key, "a number", s);
        }
        return v;
    }

    long long integer(const std::string& key, long long fallback) const
    {
        const std::string s = str(key, "");
        if (s.empty()) {
            return fallback;
        }
        std::size_t pos = 0;
        long long v = 0;
        try {
            v = std::stoll(s, &pos);
        } catch (const std::exception&) {
            bad(key, "an integer", s);
        }
        if (pos != s.size()) {
            bad(key, "an integer", s);
        }
        return v;
    }

    std::uint64_t seed(const std::string& key, std::uint64_t fallback) const
    {
        const std::string s = str(key, "");
        if (s.empty()) {
            return fallback;
        }
        std::size_t pos = 0;
        std::uint64_t v = 0;
        try {
            v = std::stoull(s, &pos);
        } catch (const std::exception&) {
            bad(key, "an unsigned integer", s);
        }
        if (pos != s.size() || s.front() == '-') {
            bad(key, "an unsigned integer", s);
        }
        return v;
    }

    bool boolean(const std::string& key, bool fallback) const
    {
        const std::string s = str(key, "");
        if (s.empty()) {
            return fallback;
        }
        if (s == "true" || s == "1") {
            return true;
        }
        if (s == "false" || s == "0") {
            return false;
        }
        bad(key, "true or false", s);
        return fallback;
    }

    std::vector<int> int_list(const std::string& key) const
    {
        const std::string s = str(key, "");
        std::vector<int> out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) {
                continue;
            }
            std::size_t pos = 0;
            int v = 0;
            try {
                v = std::stoi(item, &pos);
            } catch (const std::exception&) {
                bad(key, "a comma-separated list of integers", s);
            }
            if (pos != item.size() || v <= 0) {
                bad(key, "a comma-separated list of positive integers", s);
            }
            out.push_back(v);
        }
        return out;
    }

    [[noreturn]] void bad(const std::string& key, const std::string& expected, const std::string& got) const
    {
        throw ConfigError(name_ + "." + key + ": expected " + expected + ", got '" + got + "'");
    }

    static std::string trim(const std::string& s)
    {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) {
            return {};
        }
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

private:
    const pt::ptree* tree_;
    std::string name_;
};

std::string join(const std::vector<int>& v)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out += (i ? "," : "") + std::to_string(v[i]);
    }
    return out;
}

const char* bool_str(bool b) { return b ? "true" : "false"; }

} // namespace

Config Config::parse(std::istream& is)
{
    pt::ptree tree;
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("line " + std::to_string(e.line()) + ": " + e.message());
    }

    for (const auto& [section, body] : tree) {
        auto it = known_keys().find(section);
        if (it == known_keys().end()) {
            throw ConfigError("unknown section [" + section + "]");
        }
        if (body.empty() && !body.data().empty()) {
            throw ConfigError("key '" + section + "' outside of any section");
        }
        for (const auto& [key, value] : body) {
            if (it->second.count(key) == 0) {
                throw ConfigError("unknown key " + section + "." + key);
            }
        }
    }

    auto section = [&](const std::string& name) {
        auto child = tree.get_child_optional(name);
        return Section(child ? &*child : nullptr, name);
    };

    Config c;
    const Section m = section("model");
    try {
        c.model.variant = parse_variant(m.str("variant", to_string(c.model.variant)));
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("model.variant: ") + e.what());
    }
    try {
        c.model.head = parse_head(m.str("head", to_string(c.model.head)));
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("model.head: ") + e.what());
    }
    c.model.n_x = static_cast<int>(m.integer("n_x", c.model.n_x));
    c.model.n_u = static_cast<int>(m.integer("n_u", c.model.n_u));
    c.model.n_y = static_cast<int>(m.integer("n_y", c.model.n_y));
    c.model.energy_layers = m.int_list("energy_layers");
    c.model.data_dependent = m.boolean("data_dependent", c.model.data_dependent);
    c.model.alpha_init = m.num("alpha_init", c.model.alpha_init);
    c.model.wA_init = m.num("wA_init", c.model.wA_init);
    c.model.S = m.num("S", c.model.S);
    c.model.train_S = m.boolean("train_S", c.model.train_S);
    c.model.train_hu = m.boolean("train_hu", c.model.train_hu);
    c.model.train_hy = m.boolean("train_hy", c.model.train_hy);
    c.model.seed = m.seed("seed", c.model.seed);
    if (c.model.n_x <= 0 || c.model.n_u <= 0 || c.model.n_y <= 0) {
        throw ConfigError("model: n_x, n_u and n_y must be positive");
    }
    if (!(c.model.S > 0.0)) {
        m.bad("S", "a positive number", m.str("S", ""));
    }

    const Section s = section("solver");
    c.solver.atol = s.num("atol", c.solver.atol);
    c.solver.rtol = s.num("rtol", c.solver.rtol);
    c.solver.max_steps = static_cast<int>(s.integer("max_steps", c.solver.max_steps));
    try {
        c.solver.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("solver: ") + e.what());
    }

    const Section l = section("loss");
    try {
        c.loss.kind = parse_loss_kind(l.str("kind", to_string(c.loss.kind)));
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("loss.kind: ") + e.what());
    }
    c.loss.gamma = l.num("gamma", c.loss.gamma);
    if (!(c.loss.gamma >= 0.0)) {
        l.bad("gamma", "a non-negative number", l.str("gamma", ""));
    }

    const Section t = section("train");
    c.train.eta = t.num("eta", c.train.eta);
    c.train.epochs = static_cast<int>(t.integer("epochs", c.train.epochs));
    const std::string mode = t.str("mode", to_string(c.train.mode));
    if (mode == "full") {
        c.train.mode = TrainMode::full;
    } else if (mode == "stochastic") {
        c.train.mode = TrainMode::stochastic;
    } else {
        t.bad("mode", "full or stochastic", mode);
    }
    if (!(c.train.eta > 0.0)) {
        t.bad("eta", "a positive number", t.str("eta", ""));
    }
    if (c.train.epochs < 0) {
        t.bad("epochs", "a non-negative integer", t.str("epochs", ""));
    }

    const Section d = section("data");
    c.data.dataset = d.str("dataset", c.data.dataset);
    int default_n = 100;
    double default_noise = 0.0;
    if (c.data.dataset == "halfmoons") {
        default_n = 512;
        default_noise = 0.08;
    } else if (c.data.dataset == "spirals") {
        default_n = 600;
        default_noise = 0.02;
    } else if (c.data.dataset != "negation") {
        d.bad("dataset", "negation, halfmoons or spirals", c.data.dataset);
    }
    c.data.n = static_cast<int>(d.integer("n", default_n));
    c.data.noise = d.num("noise", default_noise);
    c.data.seed = d.seed("seed", c.data.seed);
    c.data.test_fraction = d.num("test_fraction", c.data.test_fraction);
    if (c.data.n <= 0) {
        d.bad("n", "a positive integer", d.str("n", ""));
    }
    if (!(c.data.noise >= 0.0)) {
        d.bad("noise", "a non-negative number", d.str("noise", ""));
    }
    if (!(c.data.test_fraction >= 0.0 && c.data.test_fraction < 1.0)) {
        d.bad("test_fraction", "a number in [0, 1)", d.str("test_fraction", ""));
    }
    return c;
}

Config Config::parse_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    try {
        return parse(in);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

Config Config::parse_string(const std::string& text)
{
    std::istringstream in(text);
    return parse(in);
}

std::string Config::echo() const
{
    std::ostringstream os;
    os << "[model]\n"
       << "variant = " << to_string(model.variant) << '\n'
       << "n_x = " << model.n_x << '\n'
       << "n_u = " << model.n_u << '\n'
       << "n_y = " << model.n_y << '\n'
       << "energy_layers = " << join(model.energy_layers) << '\n'
       << "head = " << to_string(model.head) << '\n'
       << "data_dependent = " << bool_str(model.data_dependent) << '\n'
       << "alpha_init = " << format_double(model.alpha_init) << '\n'
       << "wA_init = " << format_double(model.wA_init) << '\n'
       << "S = " << format_double(model.S) << '\n'
       << "train_S = " << bool_str(model.train_S) << '\n'
       << "train_hu = " << bool_str(model.train_hu) << '\n'
       << "train_hy = " << bool_str(model.train_hy) << '\n'
       << "seed = " << model.seed << '\n'
       << "\n[solver]\n"
       << "atol = " << format_double(solver.atol) << '\n'
       << "rtol = " << format_double(solver.rtol) << '\n'
       << "max_steps = " << solver.max_steps << '\n'
       << "\n[loss]\n"
       << "kind = " << to_string(loss.kind) << '\n'
       << "gamma = " << format_double(loss.gamma) << '\n'
       << "\n[train]\n"
       << "eta = " << format_double(train.eta) << '\n'
       << "epochs = " << train.epochs << '\n'
       << "mode = " << to_string(train.mode) << '\n'
       << "\n[data]\n"
       << "dataset = " << data.dataset << '\n'
       << "n = " << data.n << '\n'
       << "noise = " << format_double(data.noise) << '\n'
       << "seed = " << data.seed << '\n'
       << "test_fraction = " << format_double(data.test_fraction) << '\n';
    return os.str();
}

LossSpec Config::loss_spec() const
{
    LossSpec spec;
    spec.kind = loss.kind;
    spec.gamma = loss.gamma;
    return spec;
}

Model build_model(const Config& cfg)
{
    const auto& m = cfg.model;
    std::mt19937_64 rng(m.seed);

    if (m.variant == Variant::second_order && m.n_x % 2 != 0) {
        throw ConfigError("model: second_order fields need an even n_x, got " + std::to_string(m.n_x));
    }
    const int energy_nx = m.variant == Variant::second_order ? m.n_x / 2 : m.n_x;

    Model model;
    Vec net_w;
    try {
        if (m.variant == Variant::vanilla) {
            if (m.energy_layers.empty()) {
                throw ConfigError("model: vanilla fields need energy_layers (network widths)");
            }
            Mlp net = Mlp::from_widths(m.energy_layers, m.n_x, m.n_u, m.data_dependent);
            net_w = init_params(net, rng);
            model.field = FieldSpec::vanilla(std::move(net));
        } else {
            EnergyNet energy;
            if (m.energy_layers.empty()) {
                energy = EnergyNet::quadratic(Vec::Zero(energy_nx), m.n_u);
            } else {
                Mlp net = Mlp::from_widths(m.energy_layers, energy_nx, m.n_u, m.data_dependent);
                net_w = init_params(net, rng);
                energy = EnergyNet(std::move(net), m.head);
            }
            switch (m.variant) {
            case Variant::stable:
                model.field = FieldSpec::stable(std::move(energy));
                break;
            case Variant::port_hamiltonian:
                model.field = FieldSpec::port_hamiltonian(std::move(energy));
                break;
            default:
                model.field = FieldSpec::second_order(std::move(energy));
                break;
            }
        }
    } catch (const DimensionError& e) {
        throw ConfigError(std::string("model.energy_layers: ") + e.what());
    }

    model.w = Vec::Zero(model.field.param_count());
    model.w.head(net_w.size()) = net_w;
    if (m.variant == Variant::port_hamiltonian) {
        model.w.tail(m.n_x).setConstant(m.wA_init);
    } else if (m.variant == Variant::second_order) {
        model.w[model.w.size() - 1] = m.alpha_init;
    }

    model.h_u = AffineMap::padded_identity(m.n_u, m.n_x);
    if (m.n_y == m.n_x && !m.train_hy) {
        model.h_y = AffineMap::identity(m.n_x);
    } else {
        model.h_y = AffineMap::random(m.n_x, m.n_y, rng);
    }
    model.S = m.S;
    model.trainable = {true, m.train_hu, m.train_hy, m.train_S};
    model.validate();
    return model;
}

Dataset build_dataset(const Config& cfg)
{
    const auto& d = cfg.data;
    Dataset data;
    if (d.dataset == "negation") {
        data = gen_negation(d.n, d.seed);
    } else if (d.dataset == "halfmoons") {
        data = gen_halfmoons(d.n, d.noise, d.seed);
    } else if (d.dataset == "spirals") {
        data = gen_spirals(d.n, 3, d.noise, d.seed);
    } else {
        throw ConfigError("data.dataset: unknown dataset '" + d.dataset + "'");
    }
    if (data.n_u() != cfg.model.n_u) {
        throw ConfigError("model.n_u = " + std::to_string(cfg.model.n_u) + " but dataset '" + d.dataset +
                          "' has input dimension " + std::to_string(data.n_u()));
    }
    if (data.n_y() != cfg.model.n_y) {
        throw ConfigError("model.n_y = " + std::to_string(cfg.model.n_y) + " but dataset '" + d.dataset +
                          "' has target dimension " + std::to_string(data.n_y()));
    }
    return data;
}

std::string to_string(TrainMode mode) { return mode == TrainMode::full ? "full" : "stochastic"; }

} // namespace snf
