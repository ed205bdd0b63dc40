#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "kt/errors.hpp"
#include "kt/params.hpp"

namespace kt {

// Named-tensor container:
//
//   ktckpt 1
//   meta <key> <value...>          zero or more
//   tensor <name> <ndims> <d0> ... one per tensor, registration order
//   end
//   <raw little-endian doubles, tensors in header order>
//
// Header is plain text; the payload starts on the byte after the "end" line.

namespace detail {
inline void write_le_doubles(std::ostream& os, const std::vector<double>& xs) {
    for (double x : xs) {
        uint64_t u = std::bit_cast<uint64_t>(x);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
        os.write(reinterpret_cast<const char*>(b), 8);
    }
}

inline void read_le_doubles(std::istream& is, std::vector<double>& xs) {
    for (double& x : xs) {
        unsigned char b[8];
        is.read(reinterpret_cast<char*>(b), 8);
        if (!is) throw DataError("checkpoint: truncated payload");
        uint64_t u = 0;
        for (int i = 0; i < 8; ++i) u |= static_cast<uint64_t>(b[i]) << (8 * i);
        x = std::bit_cast<double>(u);
    }
}
}  // namespace detail

inline void save_checkpoint(std::ostream& os, const ParamStore& store,
                            const std::map<std::string, std::string>& meta = {}) {
    os << "ktckpt 1\n";
    for (const auto& [k, v] : meta) os << "meta " << k << " " << v << "\n";
    for (const auto& e : store.entries()) {
        os << "tensor " << e.name << " " << e.value.shape.size();
        for (int d : e.value.shape) os << " " << d;
        os << "\n";
    }
    os << "end\n";
    for (const auto& e : store.entries()) detail::write_le_doubles(os, e.value.data);
}

inline void save_checkpoint_file(const std::string& path, const ParamStore& store,
                                 const std::map<std::string, std::string>& meta = {}) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write checkpoint: " + path);
    save_checkpoint(f, store, meta);
}

struct Checkpoint {
    ParamStore params;  // values populated, moments zeroed
    std::map<std::string, std::string> meta;
};

inline Checkpoint load_checkpoint(std::istream& is) {
    Checkpoint ck;
    std::string line;
    if (!std::getline(is, line) || line != "ktckpt 1")
        throw DataError("checkpoint: bad magic line");
    std::vector<std::pair<std::string, std::vector<int>>> headers;
    while (std::getline(is, line)) {
        if (line == "end") break;
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind == "meta") {
            std::string key;
            ls >> key;
            std::string value;
            std::getline(ls, value);
            if (!value.empty() && value.front() == ' ') value.erase(0, 1);
            ck.meta[key] = value;
        } else if (kind == "tensor") {
            std::string name;
            size_t ndims = 0;
            ls >> name >> ndims;
            std::vector<int> shape(ndims);
            for (auto& d : shape) ls >> d;
            if (!ls) throw DataError("checkpoint: malformed tensor header: " + line);
            headers.emplace_back(name, shape);
        } else {
            throw DataError("checkpoint: unexpected header line: " + line);
        }
    }
    for (auto& [name, shape] : headers) {
        Tensor t = Tensor::zeros(shape);
        detail::read_le_doubles(is, t.data);
        ck.params.add(name, std::move(t));
    }
    return ck;
}

inline Checkpoint load_checkpoint_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read checkpoint: " + path);
    return load_checkpoint(f);
}

}  // namespace kt
