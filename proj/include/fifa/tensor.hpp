#pragma once

#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "fifa/error.hpp"
#include "fifa/rng.hpp"

namespace fifa {

// Dense row-major real tensor. Desk-scale reference math only; no views, no
// broadcasting, no autodiff.
struct Tensor {
    std::vector<size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<size_t> s, double fill = 0.0) : shape(std::move(s)) {
        data.assign(numel_of(shape), fill);
    }

    static size_t numel_of(const std::vector<size_t>& s) {
        size_t n = 1;
        for (size_t d : s) n *= d;
        return n;
    }
    size_t numel() const { return data.size(); }
    size_t dim(size_t i) const { return shape.at(i); }

    double& at2(size_t i, size_t j) { return data[i * shape[1] + j]; }
    double at2(size_t i, size_t j) const { return data[i * shape[1] + j]; }
    double& at3(size_t i, size_t j, size_t k) {
        return data[(i * shape[1] + j) * shape[2] + k];
    }
    double at3(size_t i, size_t j, size_t k) const {
        return data[(i * shape[1] + j) * shape[2] + k];
    }

    void check_finite() const {
        for (double v : data)
            if (!std::isfinite(v))
                throw make_error("NonFiniteTensor", "tensor contains NaN/inf");
    }
};

// (m x k) * (k x n) -> (m x n)
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[1] != b.shape[0])
        throw make_error("DimMismatch", "matmul shapes");
    Tensor out({a.shape[0], b.shape[1]});
    for (size_t i = 0; i < a.shape[0]; ++i)
        for (size_t k = 0; k < a.shape[1]; ++k) {
            double av = a.at2(i, k);
            if (av == 0.0) continue;
            for (size_t j = 0; j < b.shape[1]; ++j)
                out.at2(i, j) += av * b.at2(k, j);
        }
    return out;
}

inline Tensor transpose2(const Tensor& a) {
    Tensor out({a.shape[1], a.shape[0]});
    for (size_t i = 0; i < a.shape[0]; ++i)
        for (size_t j = 0; j < a.shape[1]; ++j) out.at2(j, i) = a.at2(i, j);
    return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape) throw make_error("DimMismatch", "add shapes");
    Tensor out = a;
    for (size_t i = 0; i < out.numel(); ++i) out.data[i] += b.data[i];
    return out;
}

inline double gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Row-wise layer normalization, epsilon fixed at 1e-5.
inline Tensor layer_norm(const Tensor& x, double eps = 1e-5) {
    if (x.shape.size() != 2) throw make_error("DimMismatch", "layer_norm input");
    Tensor out = x;
    const size_t d = x.shape[1];
    for (size_t i = 0; i < x.shape[0]; ++i) {
        double mean = 0.0;
        for (size_t j = 0; j < d; ++j) mean += x.at2(i, j);
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (size_t j = 0; j < d; ++j) {
            double dv = x.at2(i, j) - mean;
            var += dv * dv;
        }
        var /= static_cast<double>(d);
        double inv = 1.0 / std::sqrt(var + eps);
        for (size_t j = 0; j < d; ++j) out.at2(i, j) = (x.at2(i, j) - mean) * inv;
    }
    return out;
}

inline void softmax_rows(Tensor& x) {
    for (size_t i = 0; i < x.shape[0]; ++i) {
        double mx = x.at2(i, 0);
        for (size_t j = 1; j < x.shape[1]; ++j) mx = std::max(mx, x.at2(i, j));
        double sum = 0.0;
        for (size_t j = 0; j < x.shape[1]; ++j) {
            x.at2(i, j) = std::exp(x.at2(i, j) - mx);
            sum += x.at2(i, j);
        }
        for (size_t j = 0; j < x.shape[1]; ++j) x.at2(i, j) /= sum;
    }
}

// Flat JSON named-tensor container: {name: {"shape": [...], "data": [...]}}.
using TensorStore = std::map<std::string, Tensor>;

inline TensorStore load_tensor_store(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    TensorStore store;
    for (const auto& [name, tj] : j.items()) {
        Tensor t;
        t.shape = tj.at("shape").get<std::vector<size_t>>();
        t.data = tj.at("data").get<std::vector<double>>();
        if (t.data.size() != Tensor::numel_of(t.shape))
            throw make_error("DimMismatch", "tensor '" + name + "' data size");
        store.emplace(name, std::move(t));
    }
    return store;
}

inline std::string save_tensor_store(const TensorStore& store) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, t] : store)
        j[name] = {{"shape", t.shape}, {"data", t.data}};
    return j.dump();
}

// Seeded uniform init in [-scale, scale]; fixture weights for oracle tests.
inline Tensor random_tensor(std::vector<size_t> shape, SplitMix64& rng,
                            double scale = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = (rng.unit() * 2.0 - 1.0) * scale;
    return t;
}

}  // namespace fifa
