#include "corona/npy.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "corona/errors.hpp"

namespace corona {

namespace {

constexpr char kMagic[] = "\x93NUMPY";

std::string dict_header(const std::string& descr, const std::vector<long>& shape) {
    std::ostringstream dict;
    dict << "{'descr': '" << descr << "', 'fortran_order': False, 'shape': (";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        dict << shape[i];
        if (i + 1 < shape.size()) dict << ", ";
    }
    if (shape.size() == 1) dict << ",";
    dict << "), }";
    std::string s = dict.str();
    // Pad with spaces so magic+version+len+header is a multiple of 64,
    // newline-terminated.
    const std::size_t unpadded = 10 + s.size() + 1;
    const std::size_t padded = (unpadded + 63) / 64 * 64;
    s.append(padded - unpadded, ' ');
    s.push_back('\n');
    return s;
}

void write_npy(const std::filesystem::path& path, const std::string& descr,
               const std::vector<long>& shape, const void* data, std::size_t bytes) {
    const std::string header = dict_header(descr, shape);
    if (header.size() > 0xffff) throw IoError("npy: header too large");
    const std::uint16_t hlen = static_cast<std::uint16_t>(header.size());

    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("npy: cannot open " + tmp.string());
        out.write(kMagic, 6);
        out.put('\x01');
        out.put('\x00');
        out.write(reinterpret_cast<const char*>(&hlen), 2);
        out.write(header.data(), static_cast<std::streamsize>(header.size()));
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
        if (!out) throw IoError("npy: write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

struct NpyHeader {
    std::string descr;
    bool fortran_order = false;
    std::vector<long> shape;
    std::size_t data_offset = 0;
};

NpyHeader parse_header(const std::string& raw, const std::filesystem::path& path) {
    if (raw.size() < 10 || std::memcmp(raw.data(), kMagic, 6) != 0)
        throw IoError("npy: bad magic in " + path.string());
    if (raw[6] != '\x01' || raw[7] != '\x00')
        throw IoError("npy: unsupported version in " + path.string());
    std::uint16_t hlen;
    std::memcpy(&hlen, raw.data() + 8, 2);
    if (raw.size() < 10u + hlen) throw IoError("npy: truncated header in " + path.string());
    const std::string dict = raw.substr(10, hlen);

    NpyHeader h;
    h.data_offset = 10u + hlen;

    auto find_value = [&dict, &path](const std::string& key) {
        const std::size_t kpos = dict.find("'" + key + "'");
        if (kpos == std::string::npos) throw IoError("npy: missing key " + key + " in " + path.string());
        std::size_t pos = dict.find(':', kpos);
        if (pos == std::string::npos) throw IoError("npy: malformed header in " + path.string());
        ++pos;
        while (pos < dict.size() && dict[pos] == ' ') ++pos;
        return pos;
    };

    std::size_t pos = find_value("descr");
    if (dict[pos] != '\'') throw IoError("npy: malformed descr in " + path.string());
    const std::size_t dend = dict.find('\'', pos + 1);
    h.descr = dict.substr(pos + 1, dend - pos - 1);

    pos = find_value("fortran_order");
    if (dict.compare(pos, 4, "True") == 0)
        h.fortran_order = true;
    else if (dict.compare(pos, 5, "False") == 0)
        h.fortran_order = false;
    else
        throw IoError("npy: malformed fortran_order in " + path.string());

    pos = find_value("shape");
    if (dict[pos] != '(') throw IoError("npy: malformed shape in " + path.string());
    const std::size_t send = dict.find(')', pos);
    std::string tuple = dict.substr(pos + 1, send - pos - 1);
    std::istringstream ts(tuple);
    std::string item;
    while (std::getline(ts, item, ',')) {
        std::size_t a = item.find_first_not_of(' ');
        if (a == std::string::npos) continue;
        h.shape.push_back(std::stol(item.substr(a)));
    }
    return h;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("npy: cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

void write_movie(const MovieTensor& movie, const std::filesystem::path& path,
                 NpyComplexDtype dtype) {
    const std::vector<long> shape{movie.frames(), movie.height(), movie.width()};
    if (dtype == NpyComplexDtype::Complex128) {
        write_npy(path, "<c16", shape, movie.data().data(), movie.size() * sizeof(Complex));
        return;
    }
    std::vector<float> buf(movie.size() * 2);
    for (std::size_t i = 0; i < movie.size(); ++i) {
        buf[2 * i] = static_cast<float>(movie.data()[i].real());
        buf[2 * i + 1] = static_cast<float>(movie.data()[i].imag());
    }
    write_npy(path, "<c8", shape, buf.data(), buf.size() * sizeof(float));
}

MovieTensor read_movie(const std::filesystem::path& path) {
    const std::string raw = slurp(path);
    const NpyHeader h = parse_header(raw, path);
    if (h.fortran_order) throw IoError("npy: Fortran order not supported: " + path.string());
    if (h.shape.size() != 3)
        throw IoError("npy: expected rank-3 movie, got rank " + std::to_string(h.shape.size()) +
                      " in " + path.string());
    if (h.shape[0] < 1 || h.shape[1] < 1 || h.shape[2] < 1)
        throw IoError("npy: non-positive dimension in " + path.string());

    MovieTensor movie(static_cast<int>(h.shape[0]), static_cast<int>(h.shape[1]),
                      static_cast<int>(h.shape[2]));
    const std::size_t n = movie.size();
    const char* data = raw.data() + h.data_offset;
    const std::size_t avail = raw.size() - h.data_offset;

    if (h.descr == "<c8") {
        if (avail != n * 8) throw IoError("npy: payload size mismatch in " + path.string());
        for (std::size_t i = 0; i < n; ++i) {
            float re, im;
            std::memcpy(&re, data + 8 * i, 4);
            std::memcpy(&im, data + 8 * i + 4, 4);
            movie.data()[i] = Complex(re, im);
        }
    } else if (h.descr == "<c16") {
        if (avail != n * 16) throw IoError("npy: payload size mismatch in " + path.string());
        std::memcpy(movie.data().data(), data, avail);
    } else {
        throw IoError("npy: dtype '" + h.descr + "' not supported (want <c8 or <c16) in " +
                      path.string());
    }
    return movie;
}

void write_matrix(const Eigen::MatrixXd& mat, const std::filesystem::path& path) {
    // Row-major on disk.
    std::vector<double> buf(static_cast<std::size_t>(mat.rows()) * mat.cols());
    for (long i = 0; i < mat.rows(); ++i)
        for (long j = 0; j < mat.cols(); ++j)
            buf[static_cast<std::size_t>(i) * mat.cols() + j] = mat(i, j);
    write_npy(path, "<f8", {mat.rows(), mat.cols()}, buf.data(), buf.size() * sizeof(double));
}

Eigen::MatrixXd read_matrix(const std::filesystem::path& path) {
    const std::string raw = slurp(path);
    const NpyHeader h = parse_header(raw, path);
    if (h.fortran_order) throw IoError("npy: Fortran order not supported: " + path.string());
    if (h.shape.size() != 2 || h.descr != "<f8")
        throw IoError("npy: expected rank-2 <f8 array in " + path.string());
    Eigen::MatrixXd mat(h.shape[0], h.shape[1]);
    const char* data = raw.data() + h.data_offset;
    if (raw.size() - h.data_offset != mat.size() * sizeof(double))
        throw IoError("npy: payload size mismatch in " + path.string());
    for (long i = 0; i < mat.rows(); ++i)
        for (long j = 0; j < mat.cols(); ++j)
            std::memcpy(&mat(i, j), data + sizeof(double) * (i * mat.cols() + j), sizeof(double));
    return mat;
}

}  // namespace corona
