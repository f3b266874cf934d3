#include "senet/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "senet/error.hpp"

namespace senet {

namespace {

constexpr char kMagic[4] = {'S', 'E', 'N', 'C'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(char(std::uint8_t(v >> (8 * k))));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int k = 0; k < 8; ++k) out.push_back(char(std::uint8_t(v >> (8 * k))));
}

std::uint64_t take_u64(const std::string& buf, std::size_t off) {
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= std::uint64_t(std::uint8_t(buf[off + std::size_t(k)])) << (8 * k);
    return v;
}

}  // namespace

void write_checkpoint(const std::string& path, const CheckpointFile& ckpt) {
    std::ostringstream manifest;
    for (const auto& e : ckpt.entries) {
        manifest << e.name << ' ' << e.dtype << ' ';
        if (e.shape.empty()) manifest << '-';
        for (std::size_t i = 0; i < e.shape.size(); ++i) manifest << (i ? "," : "") << e.shape[i];
        manifest << '\n';
    }
    const std::string m = manifest.str();

    std::string header;
    header.append(kMagic, 4);
    put_u32(header, ckpt.version);
    put_u64(header, m.size());

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write checkpoint " + path);
    f.write(header.data(), std::streamsize(header.size()));
    f.write(m.data(), std::streamsize(m.size()));
    for (const auto& e : ckpt.entries)
        f.write(reinterpret_cast<const char*>(e.bytes.data()), std::streamsize(e.bytes.size()));
    if (!f) throw IoError("short write to checkpoint " + path);
}

CheckpointFile read_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 16) throw FormatError(path + ": truncated checkpoint header");
    if (std::string(buf.data(), 4) != std::string(kMagic, 4)) throw FormatError(path + ": bad checkpoint magic");
    CheckpointFile ckpt;
    ckpt.version = 0;
    for (int k = 0; k < 4; ++k) ckpt.version |= std::uint32_t(std::uint8_t(buf[4 + std::size_t(k)])) << (8 * k);
    if (ckpt.version != kCheckpointVersion)
        throw FormatError(path + ": unsupported checkpoint version " + std::to_string(ckpt.version));
    const std::uint64_t mlen = take_u64(buf, 8);
    if (buf.size() < 16 + mlen) throw FormatError(path + ": truncated checkpoint manifest");
    std::istringstream manifest(buf.substr(16, mlen));

    std::size_t off = 16 + std::size_t(mlen);
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        CkptEntry e;
        std::string dims;
        if (!(ls >> e.name >> e.dtype >> dims)) throw FormatError(path + ": malformed manifest line '" + line + "'");
        std::size_t elem_size = 0;
        if (e.dtype == "f32")
            elem_size = 4;
        else if (e.dtype == "f64" || e.dtype == "u64")
            elem_size = 8;
        else if (e.dtype == "str")
            elem_size = 1;
        else
            throw FormatError(path + ": unknown dtype " + e.dtype);
        if (dims != "-") {
            std::istringstream ds(dims);
            std::string tok;
            while (std::getline(ds, tok, ',')) e.shape.push_back(std::stoll(tok));
        }
        const std::size_t nbytes = std::size_t(numel_of(e.shape)) * elem_size;
        if (off + nbytes > buf.size()) throw FormatError(path + ": truncated payload for " + e.name);
        e.bytes.assign(buf.begin() + std::ptrdiff_t(off), buf.begin() + std::ptrdiff_t(off + nbytes));
        off += nbytes;
        ckpt.entries.push_back(std::move(e));
    }
    if (off != buf.size()) throw FormatError(path + ": trailing bytes after payloads");
    return ckpt;
}

CkptEntry u64_entry(const std::string& name, const std::vector<std::uint64_t>& vals) {
    CkptEntry e;
    e.name = name;
    e.dtype = "u64";
    e.shape = {std::int64_t(vals.size())};
    e.bytes.resize(vals.size() * 8);
    for (std::size_t i = 0; i < vals.size(); ++i)
        for (int k = 0; k < 8; ++k) e.bytes[i * 8 + std::size_t(k)] = std::uint8_t(vals[i] >> (8 * k));
    return e;
}

std::vector<std::uint64_t> entry_u64(const CkptEntry& e) {
    if (e.dtype != "u64" || e.bytes.size() % 8 != 0) throw FormatError("entry " + e.name + " is not u64 data");
    std::vector<std::uint64_t> vals(e.bytes.size() / 8, 0);
    for (std::size_t i = 0; i < vals.size(); ++i)
        for (int k = 0; k < 8; ++k) vals[i] |= std::uint64_t(e.bytes[i * 8 + std::size_t(k)]) << (8 * k);
    return vals;
}

CkptEntry str_entry(const std::string& name, const std::string& text) {
    CkptEntry e;
    e.name = name;
    e.dtype = "str";
    e.shape = {std::int64_t(text.size())};
    e.bytes.assign(text.begin(), text.end());
    return e;
}

std::string entry_str(const CkptEntry& e) {
    if (e.dtype != "str") throw FormatError("entry " + e.name + " is not text");
    return std::string(e.bytes.begin(), e.bytes.end());
}

}  // namespace senet
