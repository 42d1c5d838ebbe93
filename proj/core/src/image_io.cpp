#include "sevkit/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace sevkit {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

Tensor from_rows(const std::vector<std::vector<unsigned char>>& rows, std::size_t h, std::size_t w,
                 std::size_t stride_channels, std::size_t keep_channels) {
    Tensor t(1, keep_channels, h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t ch = 0; ch < keep_channels; ++ch) {
                t.at(0, ch, y, x) = rows[y][x * stride_channels + ch] / 255.0f;
            }
    return t;
}

Tensor read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open image: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("unreadable image (libpng error): " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_read_update_info(png, info);

    const std::size_t h = png_get_image_height(png, info);
    const std::size_t w = png_get_image_width(png, info);
    const std::size_t channels = png_get_channels(png, info);

    std::vector<std::vector<unsigned char>> rows(h);
    std::vector<png_bytep> row_ptrs(h);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    for (std::size_t y = 0; y < h; ++y) {
        rows[y].resize(rowbytes);
        row_ptrs[y] = rows[y].data();
    }
    png_read_image(png, row_ptrs.data());
    png_destroy_read_struct(&png, &info, nullptr);

    const std::size_t keep = channels >= 3 ? 3 : 1;
    return from_rows(rows, h, w, channels, keep);
}

void skip_pnm_space(std::istream& in) {
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            return;
        }
    }
}

Tensor read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open image: " + path);
    std::string magic(2, '\0');
    in.read(magic.data(), 2);
    const bool gray_bin = magic == "P5", rgb_bin = magic == "P6", gray_txt = magic == "P2";
    if (!gray_bin && !rgb_bin && !gray_txt) {
        throw std::runtime_error("unreadable image (not P2/P5/P6): " + path);
    }
    skip_pnm_space(in);
    std::size_t w, h;
    unsigned maxval;
    in >> w;
    skip_pnm_space(in);
    in >> h;
    skip_pnm_space(in);
    in >> maxval;
    if (!in || maxval == 0 || maxval > 255) {
        throw std::runtime_error("unsupported PNM header in " + path);
    }
    const std::size_t c = rgb_bin ? 3 : 1;
    Tensor t(1, c, h, w);
    if (gray_txt) {
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                unsigned v;
                in >> v;
                t.at(0, 0, y, x) = static_cast<float>(v) / maxval;
            }
    } else {
        in.get();  // single whitespace after maxval
        std::vector<unsigned char> row(w * c);
        for (std::size_t y = 0; y < h; ++y) {
            in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
            for (std::size_t x = 0; x < w; ++x)
                for (std::size_t ch = 0; ch < c; ++ch) {
                    t.at(0, ch, y, x) = row[x * c + ch] / static_cast<float>(maxval);
                }
        }
    }
    if (!in) throw std::runtime_error("truncated PNM image: " + path);
    return t;
}

}  // namespace

Tensor read_image(const std::string& path) {
    std::string ext = std::filesystem::path(path).extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](char ch) { return std::tolower(ch); });
    if (ext == ".png") return read_png(path);
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return read_pnm(path);
    throw std::runtime_error("unsupported image format: " + path);
}

void write_image_png(const Tensor& image, const std::string& path) {
    if (image.n() != 1 || (image.c() != 1 && image.c() != 3)) {
        throw std::invalid_argument("write_image_png: expected (1,1,h,w) or (1,3,h,w), got " +
                                    shape_string(image.shape()));
    }
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot open for writing: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("png write error: " + path);
    }
    png_init_io(png, fp.get());
    const std::size_t h = image.h(), w = image.w(), c = image.c();
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<unsigned char> row(w * c);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t ch = 0; ch < c; ++ch) {
                const float v = std::clamp(image.at(0, ch, y, x), 0.0f, 1.0f);
                row[x * c + ch] = static_cast<unsigned char>(std::lround(v * 255.0f));
            }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

std::vector<std::string> list_image_files(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](char ch) { return std::tolower(ch); });
        if (ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
            files.push_back(entry.path().string());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<Tensor> load_image_dir(const std::string& dir) {
    std::vector<Tensor> images;
    for (const auto& path : list_image_files(dir)) images.push_back(read_image(path));
    if (images.empty()) throw std::runtime_error("no images found in " + dir);
    return images;
}

Tensor reflect_pad_to_multiple(const Tensor& image, std::size_t multiple) {
    const std::size_t h = image.h(), w = image.w();
    const std::size_t ph = (h + multiple - 1) / multiple * multiple;
    const std::size_t pw = (w + multiple - 1) / multiple * multiple;
    if (ph == h && pw == w) return image;
    if (ph - h >= h || pw - w >= w) {
        throw std::invalid_argument("reflect_pad_to_multiple: image too small to reflect-pad");
    }
    Tensor out(image.n(), image.c(), ph, pw);
    for (std::size_t img = 0; img < image.n(); ++img)
        for (std::size_t ch = 0; ch < image.c(); ++ch)
            for (std::size_t y = 0; y < ph; ++y) {
                const std::size_t sy = y < h ? y : 2 * h - 2 - y;
                for (std::size_t x = 0; x < pw; ++x) {
                    const std::size_t sx = x < w ? x : 2 * w - 2 - x;
                    out.at(img, ch, y, x) = image.at(img, ch, sy, sx);
                }
            }
    return out;
}

Tensor crop(const Tensor& image, std::size_t h, std::size_t w) {
    if (h > image.h() || w > image.w()) {
        throw std::invalid_argument("crop: target larger than source");
    }
    Tensor out(image.n(), image.c(), h, w);
    for (std::size_t img = 0; img < image.n(); ++img)
        for (std::size_t ch = 0; ch < image.c(); ++ch)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    out.at(img, ch, y, x) = image.at(img, ch, y, x);
                }
    return out;
}

}  // namespace sevkit
