#include "ecgicd/models.hpp"

#include <nlohmann/json.hpp>

#include "ecgicd/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>

namespace ecgicd::models {

using nlohmann::json;

void ModelConfig::validate() const {
    if (in_leads == 0 || n_labels == 0 || input_len == 0) throw std::invalid_argument("model dims must be >= 1");
    if (family == Family::S4) {
        if (n_layers == 0 || d_model == 0 || d_state == 0) throw std::invalid_argument("S4 dims must be >= 1");
    } else {
        if (stage_depths.empty() || base_width < 2 || base_width % 2 != 0)
            throw std::invalid_argument("XResNet1d needs stages and an even base width >= 2");
        for (auto d : stage_depths)
            if (d == 0) throw std::invalid_argument("stage depths must be >= 1");
    }
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must be in [0, 1)");
}

std::string ModelConfig::to_json() const {
    json j;
    j["family"] = family == Family::S4 ? "s4" : "xresnet1d";
    j["in_leads"] = in_leads;
    j["n_labels"] = n_labels;
    j["input_len"] = input_len;
    j["seed"] = seed;
    j["dropout"] = dropout;
    if (family == Family::S4) {
        j["n_layers"] = n_layers;
        j["d_model"] = d_model;
        j["d_state"] = d_state;
        j["bidirectional"] = bidirectional;
    } else {
        j["stage_depths"] = stage_depths;
        j["base_width"] = base_width;
    }
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    const json j = json::parse(text);
    ModelConfig cfg;
    const auto family = j.at("family").get<std::string>();
    cfg.family = family == "s4" ? Family::S4 : Family::XResNet1d;
    cfg.in_leads = j.at("in_leads").get<std::size_t>();
    cfg.n_labels = j.at("n_labels").get<std::size_t>();
    cfg.input_len = j.at("input_len").get<std::size_t>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.dropout = j.value("dropout", 0.1);
    if (cfg.family == Family::S4) {
        cfg.n_layers = j.at("n_layers").get<std::size_t>();
        cfg.d_model = j.at("d_model").get<std::size_t>();
        cfg.d_state = j.at("d_state").get<std::size_t>();
        cfg.bidirectional = j.at("bidirectional").get<bool>();
    } else {
        cfg.stage_depths = j.at("stage_depths").get<std::vector<std::size_t>>();
        cfg.base_width = j.at("base_width").get<std::size_t>();
    }
    cfg.validate();
    return cfg;
}

ModelConfig ModelConfig::preset(const std::string& name) {
    ModelConfig cfg;
    if (name == "paper-s4") {
        cfg.family = Family::S4;
        cfg.n_layers = 4;
        cfg.d_model = 512;
        cfg.d_state = 8;
        cfg.bidirectional = true;
    } else if (name == "desk-s4") {
        cfg.family = Family::S4;
        cfg.n_layers = 4;
        cfg.d_model = 64;
        cfg.d_state = 8;
        cfg.bidirectional = true;
    } else if (name == "tiny-s4") {
        cfg.family = Family::S4;
        cfg.n_layers = 4;
        cfg.d_model = 16;
        cfg.d_state = 8;
        cfg.bidirectional = true;
    } else if (name == "paper-xresnet1d50") {
        cfg.family = Family::XResNet1d;
        cfg.stage_depths = {3, 4, 6, 3};
        cfg.base_width = 64;
    } else if (name == "desk-xresnet1d50") {
        cfg.family = Family::XResNet1d;
        cfg.stage_depths = {3, 4, 6, 3};
        cfg.base_width = 32;
    } else if (name == "tiny-xresnet1d50") {
        cfg.family = Family::XResNet1d;
        cfg.stage_depths = {3, 4, 6, 3};
        cfg.base_width = 8;
    } else {
        throw std::invalid_argument("unknown model preset '" + name + "'");
    }
    return cfg;
}

// ---------------------------------------------------------------------
// Checkpoint container
// ---------------------------------------------------------------------

std::uint32_t crc32(const unsigned char* data, std::size_t len, std::uint32_t seed) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = seed ^ 0xffffffffu;
    for (std::size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xffu] ^ (c >> 8);
    return c ^ 0xffffffffu;
}

Checkpoint Checkpoint::from_model(Model<float>& model) {
    Checkpoint ck;
    ck.config = model.config();
    for (auto* p : model.params()) ck.tensors[p->name] = p->w.v;
    return ck;
}

void Checkpoint::apply_to(Model<float>& model) const {
    for (auto* p : model.params()) {
        auto it = tensors.find(p->name);
        if (it == tensors.end()) throw CheckpointError("checkpoint missing tensor " + p->name);
        if (it->second.size() != p->w.v.size())
            throw CheckpointError("checkpoint tensor " + p->name + " has wrong size");
        p->w.v = it->second;
    }
}

namespace {

void put_bytes(std::string& buf, const void* data, std::size_t len) {
    buf.append(static_cast<const char*>(data), len);
}
template <typename T>
void put(std::string& buf, T v) {
    put_bytes(buf, &v, sizeof(v));
}
void put_str(std::string& buf, const std::string& s) {
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(s.size()));
    put_bytes(buf, s.data(), s.size());
}

struct Cursor {
    const unsigned char* p;
    const unsigned char* end;
    void need(std::size_t n) const {
        if (static_cast<std::size_t>(end - p) < n) throw CheckpointError("truncated checkpoint");
    }
    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, p, sizeof(T));
        p += sizeof(T);
        return v;
    }
    std::string get_str() {
        const auto n = get<std::uint32_t>();
        need(n);
        std::string s(reinterpret_cast<const char*>(p), n);
        p += n;
        return s;
    }
};

void put_tensor(std::string& buf, const std::string& name, const std::vector<float>& v) {
    put_str(buf, name);
    put<std::uint8_t>(buf, 4);
    put<std::uint32_t>(buf, 1);
    put<std::uint64_t>(buf, v.size());
    put_bytes(buf, v.data(), v.size() * sizeof(float));
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
    std::string body;
    put<std::uint32_t>(body, 1);  // version
    put_str(body, config.to_json());
    put<std::uint32_t>(body, epoch);
    put<double>(body, val_macro_auroc);
    put<std::uint64_t>(body, adam_t);
    put_str(body, label_set_digest);
    const std::size_t n = tensors.size() + 2 * optimizer.size();
    put<std::uint32_t>(body, static_cast<std::uint32_t>(n));
    for (const auto& [name, v] : tensors) put_tensor(body, name, v);
    for (const auto& [name, slot] : optimizer) {
        put_tensor(body, "adam.m." + name, slot.m);
        put_tensor(body, "adam.v." + name, slot.v);
    }
    const std::uint32_t crc = crc32(reinterpret_cast<const unsigned char*>(body.data()), body.size());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot write " + path);
    out.write("ECKP", 4);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    out.write(reinterpret_cast<const char*>(&crc), sizeof(crc));
    if (!out) throw CheckpointError("short write to " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open " + path);
    std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (raw.size() < 8 || raw.compare(0, 4, "ECKP") != 0)
        throw CheckpointError(path + ": not a checkpoint file");
    const std::string body = raw.substr(4, raw.size() - 8);
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, raw.data() + raw.size() - 4, 4);
    if (crc32(reinterpret_cast<const unsigned char*>(body.data()), body.size()) != stored_crc)
        throw CheckpointError(path + ": checksum mismatch");

    Cursor cur{reinterpret_cast<const unsigned char*>(body.data()),
               reinterpret_cast<const unsigned char*>(body.data()) + body.size()};
    const auto version = cur.get<std::uint32_t>();
    if (version != 1) throw CheckpointError(path + ": unsupported version");
    Checkpoint ck;
    ck.config = ModelConfig::from_json(cur.get_str());
    ck.epoch = cur.get<std::uint32_t>();
    ck.val_macro_auroc = cur.get<double>();
    ck.adam_t = cur.get<std::uint64_t>();
    ck.label_set_digest = cur.get_str();
    const auto n = cur.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) {
        const std::string name = cur.get_str();
        const auto dtype = cur.get<std::uint8_t>();
        if (dtype != 4) throw CheckpointError(path + ": unsupported tensor dtype");
        const auto ndim = cur.get<std::uint32_t>();
        std::size_t numel = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) numel *= cur.get<std::uint64_t>();
        cur.need(numel * sizeof(float));
        std::vector<float> v(numel);
        std::memcpy(v.data(), cur.p, numel * sizeof(float));
        cur.p += numel * sizeof(float);
        if (name.rfind("adam.m.", 0) == 0) {
            ck.optimizer[name.substr(7)].m = std::move(v);
        } else if (name.rfind("adam.v.", 0) == 0) {
            ck.optimizer[name.substr(7)].v = std::move(v);
        } else {
            ck.tensors[name] = std::move(v);
        }
    }
    return ck;
}

}  // namespace ecgicd::models
