#include "quite/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "quite/errors.hpp"

namespace quite {

namespace {

constexpr const char* kMagic = "quite-checkpoint 1";

std::uint64_t to_little(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
    return v;
}

std::string shape_token(const Shape& s) {
    if (s.empty()) return "-";
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
    return out;
}

Shape parse_shape(const std::string& token, const std::string& where) {
    Shape s;
    if (token == "-") return s;
    std::stringstream in(token);
    std::string part;
    while (std::getline(in, part, 'x')) {
        try {
            std::size_t used = 0;
            s.push_back(std::stoul(part, &used));
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (const std::exception&) {
            throw ValidationError(where + ": bad shape '" + token + "'");
        }
    }
    return s;
}

struct Entry {
    std::string name;
    std::size_t offset = 0;
    Shape shape;
};

struct Manifest {
    std::map<std::string, std::string> meta;
    std::vector<Entry> entries;
};

Manifest read_manifest(const std::string& base) {
    const std::string path = base + ".manifest";
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open checkpoint manifest " + path);
    std::string line;
    if (!std::getline(in, line) || line != kMagic) throw ValidationError(path + ": not a checkpoint manifest");
    Manifest m;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = path + ":" + std::to_string(lineno);
        if (line.empty()) continue;
        if (line.rfind("meta ", 0) == 0) {
            const auto eq = line.find(" = ");
            if (eq == std::string::npos) throw ValidationError(where + ": malformed meta line");
            m.meta[line.substr(5, eq - 5)] = line.substr(eq + 3);
        } else if (line.rfind("param ", 0) == 0) {
            std::istringstream fields(line.substr(6));
            Entry e;
            std::string shape;
            if (!(fields >> e.name >> e.offset >> shape)) throw ValidationError(where + ": malformed param line");
            e.shape = parse_shape(shape, where);
            m.entries.push_back(std::move(e));
        } else {
            throw ValidationError(where + ": unexpected line");
        }
    }
    return m;
}

}  // namespace

void save_checkpoint(const std::string& base, const ParamStore& params,
                     const std::map<std::string, std::string>& meta) {
    std::ofstream manifest(base + ".manifest", std::ios::binary);
    std::ofstream blob(base + ".bin", std::ios::binary);
    if (!manifest || !blob) throw ValidationError("cannot write checkpoint " + base);
    manifest << kMagic << "\n";
    for (const auto& [k, v] : meta) {
        if (k.find(' ') != std::string::npos || v.find('\n') != std::string::npos) {
            throw ValidationError("checkpoint metadata key/value not representable: " + k);
        }
        manifest << "meta " << k << " = " << v << "\n";
    }
    std::size_t offset = 0;
    for (const auto& [name, tensor] : params) {
        manifest << "param " << name << " " << offset << " " << shape_token(tensor.shape()) << "\n";
        for (double v : tensor.data()) {
            const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(v));
            blob.write(reinterpret_cast<const char*>(&bits), sizeof bits);
        }
        offset += tensor.size();
    }
    if (!manifest || !blob) throw ValidationError("failed writing checkpoint " + base);
}

std::map<std::string, std::string> read_checkpoint_meta(const std::string& base) { return read_manifest(base).meta; }

std::map<std::string, std::string> load_checkpoint(const std::string& base, ParamStore& params) {
    Manifest m = read_manifest(base);
    if (m.entries.size() != params.size()) {
        throw ValidationError("checkpoint has " + std::to_string(m.entries.size()) + " parameters, model has " +
                              std::to_string(params.size()));
    }
    std::ifstream blob(base + ".bin", std::ios::binary);
    if (!blob) throw ValidationError("cannot open checkpoint blob " + base + ".bin");
    std::vector<char> bytes((std::istreambuf_iterator<char>(blob)), std::istreambuf_iterator<char>());
    const std::size_t stored = bytes.size() / sizeof(double);
    if (bytes.size() % sizeof(double) != 0) throw ValidationError(base + ".bin: truncated blob");

    for (const auto& e : m.entries) {
        if (!params.contains(e.name)) throw ValidationError("checkpoint parameter '" + e.name + "' not in model");
        Tensor t = params.get(e.name);
        if (t.shape() != e.shape) {
            throw ValidationError("checkpoint parameter '" + e.name + "' has shape " + shape_str(e.shape) +
                                  ", model expects " + shape_str(t.shape()));
        }
        if (e.offset + t.size() > stored) throw ValidationError(base + ".bin: too short for '" + e.name + "'");
    }
    for (const auto& e : m.entries) {
        Tensor t = params.get(e.name);
        auto data = t.mutable_data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            std::uint64_t bits;
            std::memcpy(&bits, bytes.data() + (e.offset + i) * sizeof bits, sizeof bits);
            data[i] = std::bit_cast<double>(to_little(bits));
        }
    }
    return m.meta;
}

}  // namespace quite
