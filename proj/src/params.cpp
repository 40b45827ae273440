#include "sketchgame/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "sketchgame/errors.hpp"

namespace sketchgame {

Param& ParameterSet::create(const std::string& name, std::vector<int> shape) {
    if (by_name_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    auto p = std::make_unique<Param>();
    p->name = name;
    p->value = Tensor(shape);
    p->grad = Tensor(shape);
    p->m = Tensor(shape);
    p->v = Tensor(std::move(shape));
    Param* raw = p.get();
    order_.push_back(std::move(p));
    by_name_[name] = raw;
    return *raw;
}

Param* ParameterSet::find(const std::string& name) {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
}

const Param* ParameterSet::find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
}

void ParameterSet::zero_grad() {
    for (auto& p : order_) p->grad.fill(0.0);
}

void ParameterSet::scale_grad(double s) {
    for (auto& p : order_)
        for (double& g : p->grad.data) g *= s;
}

long ParameterSet::num_values() const {
    long n = 0;
    for (auto& p : order_) n += p->value.size();
    return n;
}

void Adam::step(ParameterSet& set, double lr) {
    ++steps_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    for (auto& p : set.params()) {
        for (int i = 0; i < p->value.size(); ++i) {
            double g = p->grad[i];
            if (std::isnan(g) || std::isinf(g))
                throw NumericalError("NaN gradient in parameter " + set.role() + "/" + p->name);
            p->m[i] = cfg_.beta1 * p->m[i] + (1.0 - cfg_.beta1) * g;
            p->v[i] = cfg_.beta2 * p->v[i] + (1.0 - cfg_.beta2) * g * g;
            double mhat = p->m[i] / bc1;
            double vhat = p->v[i] / bc2;
            p->value[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void init_he_normal(Tensor& t, int fan_in, Rng& rng) {
    double s = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& v : t.data) v = s * gauss(rng);
}

void init_uniform(Tensor& t, double lo, double hi, Rng& rng) {
    for (double& v : t.data) v = lo + (hi - lo) * uniform(rng);
}

namespace {

constexpr char kMagic[8] = {'S', 'G', 'T', 'M', 'A', 'P', '0', '1'};

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

}  // namespace

void save_tensor_map(const std::string& path, const std::string& meta_json, const TensorMap& tensors) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for write: " + path);
    os.write(kMagic, 8);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(meta_json.size()));
    os.write(meta_json.data(), static_cast<std::streamsize>(meta_json.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        put<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<std::uint8_t>(os, static_cast<std::uint8_t>(t.shape.size()));
        for (int d : t.shape) put<std::int32_t>(os, d);
        os.write(reinterpret_cast<const char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
    if (!os) throw IoError("write failed: " + path);
}

TensorMap load_tensor_map(const std::string& path, std::string* meta_json) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0) throw IoError("bad checkpoint header: " + path);
    auto meta_len = get<std::uint32_t>(is);
    std::string meta(meta_len, '\0');
    is.read(meta.data(), meta_len);
    if (meta_json) *meta_json = meta;
    auto n = get<std::uint32_t>(is);
    TensorMap out;
    out.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        auto name_len = get<std::uint16_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        auto ndim = get<std::uint8_t>(is);
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = get<std::int32_t>(is);
        Tensor t(shape);
        is.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        out.emplace_back(std::move(name), std::move(t));
    }
    if (!is) throw IoError("truncated checkpoint: " + path);
    return out;
}

void pack_parameter_set(const ParameterSet& set, TensorMap& out) {
    for (const auto& p : set.params()) {
        out.emplace_back(set.role() + "/" + p->name, p->value);
        out.emplace_back(set.role() + "/adam_m/" + p->name, p->m);
        out.emplace_back(set.role() + "/adam_v/" + p->name, p->v);
    }
}

void unpack_parameter_set(ParameterSet& set, const TensorMap& in) {
    std::map<std::string, const Tensor*> by_name;
    for (const auto& [name, t] : in) by_name[name] = &t;
    for (const auto& p : set.params()) {
        auto pick = [&](const std::string& key, Tensor& dst) {
            auto it = by_name.find(key);
            if (it == by_name.end()) throw IoError("checkpoint missing tensor: " + key);
            if (it->second->shape != dst.shape) throw IoError("checkpoint shape mismatch: " + key);
            dst.data = it->second->data;
        };
        pick(set.role() + "/" + p->name, p->value);
        pick(set.role() + "/adam_m/" + p->name, p->m);
        pick(set.role() + "/adam_v/" + p->name, p->v);
    }
}

}  // namespace sketchgame
