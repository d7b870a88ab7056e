#include "fga/image_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fga {

static void io_fail(const std::string& path, const std::string& why) {
    throw std::runtime_error(path + ": " + why);
}

static unsigned char quantize(double v) {
    long q = std::lround(v);
    if (q < 0) q = 0;
    if (q > 255) q = 255;
    return (unsigned char)q;
}

static void write_pnm(const std::string& path, const Tensor& img, int channels,
                      const char* magic) {
    if (img.c != channels)
        throw std::invalid_argument(path + ": expected " + std::to_string(channels) +
                                    "-channel tensor for " + magic);
    std::ofstream f(path, std::ios::binary);
    if (!f) io_fail(path, "cannot open for writing");
    f << magic << "\n" << img.w << " " << img.h << "\n255\n";
    std::vector<unsigned char> row(size_t(img.w) * channels);
    for (int r = 0; r < img.h; ++r) {
        for (int col = 0; col < img.w; ++col)
            for (int ch = 0; ch < channels; ++ch)
                row[size_t(col) * channels + ch] = quantize(img.at(r, col, ch));
        f.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
    }
    if (!f) io_fail(path, "write failed");
}

void write_ppm(const std::string& path, const Tensor& img) { write_pnm(path, img, 3, "P6"); }
void write_pgm(const std::string& path, const Tensor& img) { write_pnm(path, img, 1, "P5"); }

// Reads one whitespace-delimited token, skipping '#' comment lines.
static std::string next_token(std::istream& f, const std::string& path) {
    std::string tok;
    int ch;
    while ((ch = f.get()) != EOF) {
        if (ch == '#') {
            while ((ch = f.get()) != EOF && ch != '\n') {}
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(char(ch));
    }
    if (tok.empty()) io_fail(path, "unexpected end of header");
    return tok;
}

static Tensor read_pnm(const std::string& path, const char* want_magic) {
    std::ifstream f(path, std::ios::binary);
    if (!f) io_fail(path, "cannot open");
    std::string magic = next_token(f, path);
    if (magic != want_magic)
        io_fail(path, "expected " + std::string(want_magic) + " magic, got '" + magic + "'");
    int w = std::stoi(next_token(f, path));
    int h = std::stoi(next_token(f, path));
    int maxval = std::stoi(next_token(f, path));
    if (w < 1 || h < 1) io_fail(path, "bad dimensions");
    if (maxval != 255) io_fail(path, "only maxval 255 is supported");
    // Exactly one whitespace byte separates the header from pixel data; the
    // token reader has already consumed it.
    int channels = std::strcmp(want_magic, "P6") == 0 ? 3 : 1;
    Tensor img(h, w, channels, 0.0);
    std::vector<unsigned char> row(size_t(w) * channels);
    for (int r = 0; r < h; ++r) {
        f.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size()));
        if (f.gcount() != std::streamsize(row.size())) io_fail(path, "truncated pixel data");
        for (int col = 0; col < w; ++col)
            for (int ch = 0; ch < channels; ++ch)
                img.at(r, col, ch) = double(row[size_t(col) * channels + ch]);
    }
    return img;
}

Tensor read_ppm(const std::string& path) { return read_pnm(path, "P6"); }
Tensor read_pgm(const std::string& path) { return read_pnm(path, "P5"); }

Tensor read_image(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) io_fail(path, "cannot open");
    char m[2] = {0, 0};
    f.read(m, 2);
    f.close();
    if (m[0] == 'P' && m[1] == '6') return read_ppm(path);
    if (m[0] == 'P' && m[1] == '5') return read_pgm(path);
    io_fail(path, "unrecognized image magic (want P6 or P5)");
    return {};
}

static void put_u32(std::ofstream& f, uint32_t v) {
    unsigned char b[4] = {(unsigned char)(v & 0xFF), (unsigned char)((v >> 8) & 0xFF),
                          (unsigned char)((v >> 16) & 0xFF), (unsigned char)((v >> 24) & 0xFF)};
    f.write(reinterpret_cast<const char*>(b), 4);
}

static uint32_t get_u32(std::ifstream& f, const std::string& path) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    if (f.gcount() != 4) io_fail(path, "truncated header");
    return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
}

void write_atns(const std::string& path, const Tensor& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) io_fail(path, "cannot open for writing");
    f.write("ATNS", 4);
    put_u32(f, uint32_t(t.h));
    put_u32(f, uint32_t(t.w));
    put_u32(f, uint32_t(t.c));
    // Planar float32: channel 0 plane first, each plane row-major.
    std::vector<float> plane(size_t(t.h) * t.w);
    for (int ch = 0; ch < t.c; ++ch) {
        for (int r = 0; r < t.h; ++r)
            for (int col = 0; col < t.w; ++col)
                plane[size_t(r) * t.w + col] = float(t.at(r, col, ch));
        f.write(reinterpret_cast<const char*>(plane.data()),
                std::streamsize(plane.size() * sizeof(float)));
    }
    if (!f) io_fail(path, "write failed");
}

Tensor read_atns(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) io_fail(path, "cannot open");
    char magic[4];
    f.read(magic, 4);
    if (f.gcount() != 4 || std::memcmp(magic, "ATNS", 4) != 0) io_fail(path, "bad ATNS magic");
    uint32_t h = get_u32(f, path), w = get_u32(f, path), c = get_u32(f, path);
    if (h == 0 || w == 0 || c == 0 || h > (1u << 20) || w > (1u << 20) || c > (1u << 16))
        io_fail(path, "implausible ATNS dimensions");
    Tensor t(int(h), int(w), int(c), 0.0);
    std::vector<float> plane(size_t(h) * w);
    for (uint32_t ch = 0; ch < c; ++ch) {
        f.read(reinterpret_cast<char*>(plane.data()),
               std::streamsize(plane.size() * sizeof(float)));
        if (f.gcount() != std::streamsize(plane.size() * sizeof(float)))
            io_fail(path, "truncated ATNS data");
        for (uint32_t r = 0; r < h; ++r)
            for (uint32_t col = 0; col < w; ++col)
                t.at(int(r), int(col), int(ch)) = double(plane[size_t(r) * w + col]);
    }
    return t;
}

}  // namespace fga
