#include "prosub/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace prosub {

static_assert(std::endian::native == std::endian::little,
              "checkpoint/dataset formats assume a little-endian host");

namespace {

constexpr uint32_t kFormatVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace

void save_mlp(const Mlp& net, const std::string& path) {
    net.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open for write: " + path);
    put<uint32_t>(os, kFormatVersion);
    put<uint32_t>(os, static_cast<uint32_t>(net.layers.size()));
    for (const auto& l : net.layers) {
        put<uint64_t>(os, l.in_dim());
        put<uint64_t>(os, l.out_dim());
        put<uint32_t>(os, static_cast<uint32_t>(l.activation));
        put<double>(os, l.dropout_rate);
        os.write(reinterpret_cast<const char*>(l.weights.values().data()),
                 static_cast<std::streamsize>(l.weights.size() * sizeof(double)));
        os.write(reinterpret_cast<const char*>(l.bias.data()),
                 static_cast<std::streamsize>(l.bias.size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

Mlp load_mlp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
    uint32_t version = get<uint32_t>(is);
    if (version != kFormatVersion) {
        throw std::runtime_error("checkpoint: unsupported format version " +
                                 std::to_string(version));
    }
    uint32_t count = get<uint32_t>(is);
    if (count == 0) throw std::runtime_error("checkpoint: zero layers");
    Mlp net;
    for (uint32_t i = 0; i < count; ++i) {
        uint64_t in = get<uint64_t>(is);
        uint64_t out = get<uint64_t>(is);
        uint32_t act = get<uint32_t>(is);
        if (act > 2) throw std::runtime_error("checkpoint: bad activation tag");
        DenseLayer l;
        l.activation = static_cast<Activation>(act);
        l.dropout_rate = get<double>(is);
        std::vector<double> w(in * out);
        is.read(reinterpret_cast<char*>(w.data()),
                static_cast<std::streamsize>(w.size() * sizeof(double)));
        l.weights = Matrix(in, out, std::move(w));
        l.bias.resize(out);
        is.read(reinterpret_cast<char*>(l.bias.data()),
                static_cast<std::streamsize>(out * sizeof(double)));
        if (!is) throw std::runtime_error("checkpoint: truncated file");
        net.layers.push_back(std::move(l));
    }
    net.validate();
    return net;
}

}  // namespace prosub
