#include "dve/models/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dve/textio.hpp"

namespace dve::models {

namespace {

void write_tensor(std::ostringstream& out, const std::string& tag, const std::string& name, const diff::Tensor& t) {
    out << tag << ' ' << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
    out << textio::join_exact(t.data()) << '\n';
}

class LineReader {
public:
    explicit LineReader(const std::string& text) : in_(text) {}

    std::string next() {
        std::string line;
        if (!std::getline(in_, line)) fail("unexpected end of file");
        ++line_no_;
        return line;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw std::runtime_error("checkpoint line " + std::to_string(line_no_) + ": " + msg);
    }

private:
    std::istringstream in_;
    std::size_t line_no_ = 0;
};

diff::Tensor read_values(LineReader& r, std::size_t rows, std::size_t cols) {
    std::vector<double> values;
    try {
        values = textio::split_doubles(r.next());
    } catch (const std::invalid_argument& e) {
        r.fail(e.what());
    }
    if (values.size() != rows * cols) r.fail("expected " + std::to_string(rows * cols) + " values");
    diff::Tensor t(diff::Shape{rows, cols});
    std::copy(values.begin(), values.end(), t.storage().begin());
    return t;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
    std::ostringstream out;
    const NetConfig& c = ck.config;
    out << kCheckpointMagic << '\n';
    out << "obs_dim " << c.obs_dim << '\n';
    out << "n_actions " << c.n_actions << '\n';
    out << "encoder_hidden " << c.encoder_hidden << '\n';
    out << "lstm_hidden " << c.lstm_hidden << '\n';
    out << "head " << head_name(c.head) << '\n';
    out << "n_basis " << c.n_basis << '\n';
    out << "n_control " << c.n_control << '\n';
    out << "seed " << ck.seed << '\n';
    out << "update " << ck.update << '\n';
    out << "env_steps " << ck.env_steps << '\n';
    for (const auto& [k, v] : ck.extra) out << "extra " << k << ' ' << v << '\n';
    for (const auto& p : ck.params) write_tensor(out, "tensor", p.name, p.value);
    if (ck.optimizer) {
        const auto& o = *ck.optimizer;
        if (o.m.size() != ck.params.size() || o.v.size() != ck.params.size()) {
            throw std::invalid_argument("checkpoint: optimizer moments do not match the parameter list");
        }
        out << "adam_steps " << o.steps << '\n';
        for (std::size_t i = 0; i < o.m.size(); ++i) {
            write_tensor(out, "adam_m", ck.params[i].name, o.m[i]);
            write_tensor(out, "adam_v", ck.params[i].name, o.v[i]);
        }
    }
    out << "end\n";
    return out.str();
}

Checkpoint parse_checkpoint(const std::string& text) {
    LineReader r(text);
    if (r.next() != kCheckpointMagic) r.fail("missing '" + std::string(kCheckpointMagic) + "' header");

    auto field = [&](const char* key) {
        std::istringstream ls(r.next());
        std::string k, v;
        ls >> k >> v;
        if (k != key || v.empty()) r.fail(std::string("expected '") + key + "'");
        return v;
    };
    auto as_uint = [&](const std::string& s) {
        try {
            std::size_t pos = 0;
            auto v = std::stoull(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return static_cast<std::uint64_t>(v);
        } catch (const std::exception&) {
            r.fail("not an unsigned integer: '" + s + "'");
        }
    };

    Checkpoint ck;
    NetConfig& c = ck.config;
    c.obs_dim = as_uint(field("obs_dim"));
    c.n_actions = as_uint(field("n_actions"));
    c.encoder_hidden = as_uint(field("encoder_hidden"));
    c.lstm_hidden = as_uint(field("lstm_hidden"));
    try {
        c.head = parse_head(field("head"));
    } catch (const std::invalid_argument& e) {
        r.fail(e.what());
    }
    c.n_basis = as_uint(field("n_basis"));
    c.n_control = as_uint(field("n_control"));
    ck.seed = as_uint(field("seed"));
    ck.update = static_cast<std::int64_t>(as_uint(field("update")));
    ck.env_steps = static_cast<std::int64_t>(as_uint(field("env_steps")));

    try {
        ck.params = ActorCritic::make_layout(c);
    } catch (const std::invalid_argument& e) {
        r.fail(e.what());
    }
    std::size_t n_tensors = 0;
    std::size_t n_moments = 0;
    for (;;) {
        const std::string line = r.next();
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "end") break;
        if (tag == "extra") {
            std::string k, v;
            ls >> k >> v;
            if (k.empty()) r.fail("empty extra key");
            ck.extra[k] = v;
            continue;
        }
        if (tag == "adam_steps") {
            std::string v;
            ls >> v;
            OptimizerState o;
            o.steps = static_cast<std::int64_t>(as_uint(v));
            for (const auto& p : ck.params) {
                o.m.emplace_back(p.value.shape());
                o.v.emplace_back(p.value.shape());
            }
            ck.optimizer = std::move(o);
            continue;
        }
        if (tag != "tensor" && tag != "adam_m" && tag != "adam_v") r.fail("unknown record '" + tag + "'");
        std::string name;
        std::size_t rows = 0, cols = 0;
        if (!(ls >> name >> rows >> cols)) r.fail("malformed tensor header");
        if (!ck.params.contains(name)) r.fail("parameter '" + name + "' is not part of this network");
        auto& p = ck.params.get(name);
        if (p.value.shape() != diff::Shape{rows, cols}) {
            r.fail("shape of '" + name + "' is " + diff::Shape{rows, cols}.to_string() + ", network expects " +
                   p.value.shape().to_string());
        }
        diff::Tensor t = read_values(r, rows, cols);
        if (tag == "tensor") {
            p.value = std::move(t);
            ++n_tensors;
            continue;
        }
        if (!ck.optimizer) r.fail("optimizer moments before 'adam_steps'");
        std::size_t idx = 0;
        while (ck.params[idx].name != name) ++idx;
        (tag == "adam_m" ? ck.optimizer->m : ck.optimizer->v)[idx] = std::move(t);
        ++n_moments;
    }
    if (n_tensors != ck.params.size()) r.fail("checkpoint is missing parameter tensors");
    if (ck.optimizer && n_moments != 2 * ck.params.size()) r.fail("checkpoint is missing optimizer moments");
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    const std::string text = serialize_checkpoint(ck);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << text;
        if (!out.flush()) throw std::runtime_error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_checkpoint(buf.str());
}

OptimizerState capture_optimizer(const diff::Adam& adam) {
    return {adam.steps(), adam.first_moments(), adam.second_moments()};
}

void restore_optimizer(diff::Adam& adam, const OptimizerState& state) {
    if (state.m.size() != adam.first_moments().size()) {
        throw std::invalid_argument("restore_optimizer: moment count does not match the optimizer");
    }
    adam.first_moments() = state.m;
    adam.second_moments() = state.v;
    adam.set_steps(state.steps);
}

}  // namespace dve::models
