#include "core/serialize.hpp"

#include <cstring>
#include <fstream>

#include "core/error.hpp"

namespace omnivl {

namespace {

constexpr char kMagic[8] = {'O', 'V', 'L', 'S', 'T', 'O', 'R', '1'};

void write_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

void write_str(std::ostream& os, const std::string& s) {
    write_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_str(std::istream& is) {
    const uint64_t n = read_u64(is);
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    return s;
}

}  // namespace

const Tensor& ArrayStore::get(const std::string& name) const {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw ParseError("array store: missing array '" + name + "'");
    return it->second;
}

double ArrayStore::get_scalar(const std::string& name) const {
    const Tensor& t = get(name);
    if (t.numel() != 1) throw ParseError("array store: '" + name + "' is not a scalar");
    return t.data[0];
}

void ArrayStore::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ParseError("cannot open for writing: " + path);
    os.write(kMagic, 8);
    write_u64(os, arrays.size());
    for (const auto& [name, t] : arrays) {
        write_str(os, name);
        write_u64(os, t.shape.size());
        for (i64 d : t.shape) write_u64(os, static_cast<uint64_t>(d));
        static_assert(sizeof(double) == 8);
        os.write(reinterpret_cast<const char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
    write_u64(os, text.size());
    for (const auto& [name, s] : text) {
        write_str(os, name);
        write_str(os, s);
    }
    if (!os) throw ParseError("write failed: " + path);
}

ArrayStore ArrayStore::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw ParseError("not an array store file: " + path);
    ArrayStore st;
    const uint64_t n = read_u64(is);
    for (uint64_t i = 0; i < n; ++i) {
        std::string name = read_str(is);
        const uint64_t rank = read_u64(is);
        std::vector<i64> shape(rank);
        for (auto& d : shape) d = static_cast<i64>(read_u64(is));
        Tensor t(shape);
        is.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (!is) throw ParseError("truncated array store: " + path);
        st.arrays.emplace(std::move(name), std::move(t));
    }
    const uint64_t nt = read_u64(is);
    for (uint64_t i = 0; i < nt; ++i) {
        std::string name = read_str(is);
        st.text.emplace(std::move(name), read_str(is));
    }
    return st;
}

}  // namespace omnivl
