#include "ctxcert/npy.hpp"

#include "ctxcert/error.hpp"

#include <array>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>

static_assert(std::endian::native == std::endian::little, "NPY I/O assumes a little-endian host");

namespace ctxcert {

namespace {

constexpr std::array<char, 6> kMagic = {'\x93', 'N', 'U', 'M', 'P', 'Y'};

std::string quoted_value(const std::string &dict, const std::string &key)
{
    const auto k = dict.find("'" + key + "'");
    if (k == std::string::npos)
        throw FormatError("npy header missing key '" + key + "'");
    auto colon = dict.find(':', k);
    if (colon == std::string::npos)
        throw FormatError("npy header: malformed entry for '" + key + "'");
    return dict.substr(colon + 1);
}

void skip_space(const std::string &s, std::size_t &pos)
{
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
        ++pos;
}

struct RawArray {
    NpyHeader header;
    std::vector<char> payload;
};

RawArray read_raw(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());

    std::array<char, 6> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic)
        throw FormatError(path.string() + ": not an NPY file (bad magic)");

    unsigned char version[2];
    in.read(reinterpret_cast<char *>(version), 2);
    std::uint32_t header_len = 0;
    if (version[0] == 1) {
        unsigned char len[2];
        in.read(reinterpret_cast<char *>(len), 2);
        header_len = len[0] | (len[1] << 8);
    } else if (version[0] == 2 || version[0] == 3) {
        unsigned char len[4];
        in.read(reinterpret_cast<char *>(len), 4);
        header_len = len[0] | (len[1] << 8) | (len[2] << 16) | (static_cast<std::uint32_t>(len[3]) << 24);
    } else {
        throw FormatError(path.string() + ": unsupported NPY version " + std::to_string(version[0]));
    }
    if (!in)
        throw FormatError(path.string() + ": truncated NPY preamble");

    std::string dict(header_len, '\0');
    in.read(dict.data(), header_len);
    if (!in)
        throw FormatError(path.string() + ": truncated NPY header");

    RawArray raw;
    raw.header = parse_npy_header(dict);
    if (raw.header.fortran_order)
        throw FormatError(path.string() + ": Fortran-order arrays are not supported");
    raw.payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    return raw;
}

void write_raw(const std::filesystem::path &path, const std::string &descr, const Shape &shape,
               const void *payload, std::size_t bytes)
{
    std::string dict = "{'descr': '" + descr + "', 'fortran_order': False, 'shape': " +
                       shape_to_string(shape) + ", }";
    // Preamble is 10 bytes; pad so the payload starts on a 64-byte boundary, header ends in '\n'.
    const std::size_t unpadded = 10 + dict.size() + 1;
    const std::size_t total = (unpadded + 63) / 64 * 64;
    dict.append(total - unpadded, ' ');
    dict.push_back('\n');

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out.write(kMagic.data(), kMagic.size());
    const char version[2] = {1, 0};
    out.write(version, 2);
    const auto len = static_cast<std::uint16_t>(dict.size());
    const char len_bytes[2] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
    out.write(len_bytes, 2);
    out.write(dict.data(), static_cast<std::streamsize>(dict.size()));
    out.write(static_cast<const char *>(payload), static_cast<std::streamsize>(bytes));
    if (!out)
        throw IoError("write failed for " + path.string());
}

} // namespace

NpyHeader parse_npy_header(const std::string &dict)
{
    NpyHeader header;

    {
        std::string rest = quoted_value(dict, "descr");
        std::size_t pos = 0;
        skip_space(rest, pos);
        if (pos >= rest.size() || (rest[pos] != '\'' && rest[pos] != '"'))
            throw FormatError("npy header: descr is not a string");
        const char quote = rest[pos];
        const auto end = rest.find(quote, pos + 1);
        if (end == std::string::npos)
            throw FormatError("npy header: unterminated descr");
        header.descr = rest.substr(pos + 1, end - pos - 1);
    }

    {
        std::string rest = quoted_value(dict, "fortran_order");
        std::size_t pos = 0;
        skip_space(rest, pos);
        if (rest.compare(pos, 4, "True") == 0)
            header.fortran_order = true;
        else if (rest.compare(pos, 5, "False") == 0)
            header.fortran_order = false;
        else
            throw FormatError("npy header: fortran_order must be True or False");
    }

    {
        std::string rest = quoted_value(dict, "shape");
        std::size_t pos = 0;
        skip_space(rest, pos);
        if (pos >= rest.size() || rest[pos] != '(')
            throw FormatError("npy header: shape is not a tuple");
        ++pos;
        while (true) {
            skip_space(rest, pos);
            if (pos >= rest.size())
                throw FormatError("npy header: unterminated shape");
            if (rest[pos] == ')')
                break;
            if (!std::isdigit(static_cast<unsigned char>(rest[pos])))
                throw FormatError("npy header: bad shape entry");
            std::size_t value = 0;
            while (pos < rest.size() && std::isdigit(static_cast<unsigned char>(rest[pos])))
                value = value * 10 + static_cast<std::size_t>(rest[pos++] - '0');
            header.shape.push_back(value);
            skip_space(rest, pos);
            if (pos < rest.size() && rest[pos] == ',')
                ++pos;
        }
    }
    return header;
}

Tensor read_npy(const std::filesystem::path &path)
{
    RawArray raw = read_raw(path);
    const std::size_t count = shape_size(raw.header.shape);
    std::vector<float> data(count);

    if (raw.header.descr == "<f4") {
        if (raw.payload.size() != count * sizeof(float))
            throw FormatError(path.string() + ": payload size does not match shape");
        std::memcpy(data.data(), raw.payload.data(), count * sizeof(float));
    } else if (raw.header.descr == "<f8") {
        if (raw.payload.size() != count * sizeof(double))
            throw FormatError(path.string() + ": payload size does not match shape");
        for (std::size_t i = 0; i < count; ++i) {
            double v;
            std::memcpy(&v, raw.payload.data() + i * sizeof(double), sizeof(double));
            data[i] = static_cast<float>(v);
        }
    } else {
        throw FormatError(path.string() + ": unsupported dtype '" + raw.header.descr + "'");
    }
    return Tensor(std::move(raw.header.shape), std::move(data));
}

void write_npy(const Tensor &tensor, const std::filesystem::path &path)
{
    if (tensor.empty())
        throw ShapeError("refusing to write an empty tensor to " + path.string());
    write_raw(path, "<f4", tensor.shape(), tensor.data().data(), tensor.size() * sizeof(float));
}

std::vector<std::int64_t> read_npy_int(const std::filesystem::path &path, Shape *shape)
{
    RawArray raw = read_raw(path);
    const std::size_t count = shape_size(raw.header.shape);
    std::vector<std::int64_t> values(count);

    if (raw.header.descr == "<i8") {
        if (raw.payload.size() != count * 8)
            throw FormatError(path.string() + ": payload size does not match shape");
        std::memcpy(values.data(), raw.payload.data(), count * 8);
    } else if (raw.header.descr == "<i4") {
        if (raw.payload.size() != count * 4)
            throw FormatError(path.string() + ": payload size does not match shape");
        for (std::size_t i = 0; i < count; ++i) {
            std::int32_t v;
            std::memcpy(&v, raw.payload.data() + i * 4, 4);
            values[i] = v;
        }
    } else {
        throw FormatError(path.string() + ": unsupported integer dtype '" + raw.header.descr + "'");
    }
    if (shape)
        *shape = raw.header.shape;
    return values;
}

void write_npy_int(const std::vector<std::int64_t> &values, const std::filesystem::path &path)
{
    if (values.empty())
        throw ShapeError("refusing to write an empty array to " + path.string());
    write_raw(path, "<i8", Shape{values.size()}, values.data(), values.size() * 8);
}

} // namespace ctxcert
