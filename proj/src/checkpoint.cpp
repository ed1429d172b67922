#include "flowlab/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace flowlab {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'F', 'L', 'O', 'W', 'C', 'N', 'T', '1'};

void write_u64le(std::ostream& os, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64le(std::istream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

void write_f64le(std::ostream& os, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    write_u64le(os, bits);
}

double read_f64le(std::istream& is) {
    std::uint64_t bits = read_u64le(is);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

json net_meta(const VelocityNet& net) {
    return json{{"dim_in", net.cfg.dim_in},   {"dim_cond", net.cfg.dim_cond},
                {"width", net.cfg.width},     {"n_blocks", net.cfg.n_blocks},
                {"n_freq", net.cfg.n_freq},   {"max_freq", net.cfg.max_freq}};
}

NetConfig net_cfg_from_meta(const json& m) {
    NetConfig cfg;
    cfg.dim_in = m.at("dim_in").get<int>();
    cfg.dim_cond = m.at("dim_cond").get<int>();
    cfg.width = m.at("width").get<int>();
    cfg.n_blocks = m.at("n_blocks").get<int>();
    cfg.n_freq = m.at("n_freq").get<int>();
    cfg.max_freq = m.at("max_freq").get<double>();
    return cfg;
}

void fill_net_from(const std::vector<ArrayEntry>& arrays, const std::string& prefix,
                   VelocityNet& net) {
    for (auto& [name, param] : named_params(net)) {
        const std::string full = prefix + name;
        bool found = false;
        for (const auto& e : arrays) {
            if (e.name == full) {
                if (!e.tensor.same_shape(*param)) {
                    throw std::runtime_error("checkpoint: shape mismatch for " + full);
                }
                *param = e.tensor;
                found = true;
                break;
            }
        }
        if (!found) throw std::runtime_error("checkpoint: missing array " + full);
    }
}

void append_net(std::vector<ArrayEntry>& arrays, const std::string& prefix,
                const VelocityNet& net) {
    for (auto& [name, param] : named_params(net)) {
        arrays.push_back({prefix + name, *param});
    }
}

}  // namespace

void save_container(const std::string& path, const std::vector<ArrayEntry>& arrays,
                    const json& meta) {
    json manifest;
    manifest["version"] = kContainerVersion;
    manifest["meta"] = meta;
    manifest["arrays"] = json::array();
    std::uint64_t offset = 0;
    for (const auto& e : arrays) {
        json a;
        a["name"] = e.name;
        a["shape"] = e.tensor.shape;
        a["offset"] = offset;
        a["count"] = e.tensor.numel();
        manifest["arrays"].push_back(a);
        offset += 8 * e.tensor.numel();
    }
    const std::string mstr = manifest.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    os.write(kMagic, 8);
    write_u64le(os, mstr.size());
    os.write(mstr.data(), static_cast<std::streamsize>(mstr.size()));
    for (const auto& e : arrays) {
        for (double v : e.tensor.data) write_f64le(os, v);
    }
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

std::vector<ArrayEntry> load_container(const std::string& path, json* meta_out) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0) {
        throw std::runtime_error("checkpoint: bad magic in " + path);
    }
    const std::uint64_t mlen = read_u64le(is);
    std::string mstr(mlen, '\0');
    is.read(mstr.data(), static_cast<std::streamsize>(mlen));
    json manifest = json::parse(mstr);
    if (manifest.at("version").get<int>() != kContainerVersion) {
        throw std::runtime_error("checkpoint: unsupported container version in " + path);
    }
    if (meta_out) *meta_out = manifest.at("meta");

    std::vector<ArrayEntry> arrays;
    const std::streampos payload_start = is.tellg();
    for (const auto& a : manifest.at("arrays")) {
        ArrayEntry e;
        e.name = a.at("name").get<std::string>();
        e.tensor.shape = a.at("shape").get<std::vector<std::size_t>>();
        const std::uint64_t count = a.at("count").get<std::uint64_t>();
        if (count != Tensor::numel_of(e.tensor.shape)) {
            throw std::runtime_error("checkpoint: manifest count/shape mismatch for " + e.name);
        }
        is.seekg(payload_start + static_cast<std::streamoff>(a.at("offset").get<std::uint64_t>()));
        e.tensor.data.resize(count);
        for (std::uint64_t i = 0; i < count; ++i) e.tensor.data[i] = read_f64le(is);
        if (!is) throw std::runtime_error("checkpoint: truncated payload in " + path);
        arrays.push_back(std::move(e));
    }
    return arrays;
}

void save_net(const std::string& path, const VelocityNet& net) {
    std::vector<ArrayEntry> arrays;
    append_net(arrays, "", net);
    json meta;
    meta["kind"] = "velocity_net";
    meta["net"] = net_meta(net);
    save_container(path, arrays, meta);
}

VelocityNet load_net(const std::string& path) {
    json meta;
    auto arrays = load_container(path, &meta);
    VelocityNet net = VelocityNet::zeros(net_cfg_from_meta(meta.at("net")));
    fill_net_from(arrays, "", net);
    return net;
}

void save_train_state(const std::string& path, const TrainState& state) {
    std::vector<ArrayEntry> arrays;
    append_net(arrays, "theta/", state.theta);
    append_net(arrays, "ema/", state.theta_ema);
    append_net(arrays, "adam_m/", state.adam_m);
    append_net(arrays, "adam_v/", state.adam_v);
    json meta;
    meta["kind"] = "train_state";
    meta["net"] = net_meta(state.theta);
    meta["adam_step"] = state.adam_step;
    meta["iters"] = state.iters;
    save_container(path, arrays, meta);
}

TrainState load_train_state(const std::string& path) {
    json meta;
    auto arrays = load_container(path, &meta);
    const NetConfig cfg = net_cfg_from_meta(meta.at("net"));
    TrainState state = TrainState::from_net(VelocityNet::zeros(cfg));
    fill_net_from(arrays, "theta/", state.theta);
    fill_net_from(arrays, "ema/", state.theta_ema);
    fill_net_from(arrays, "adam_m/", state.adam_m);
    fill_net_from(arrays, "adam_v/", state.adam_v);
    state.adam_step = meta.at("adam_step").get<std::int64_t>();
    state.iters = meta.at("iters").get<std::int64_t>();
    return state;
}

}  // namespace flowlab
