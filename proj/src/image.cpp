#include "anoseg/image.hpp"

#include "anoseg/error.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>

namespace anoseg {

namespace {

void check_dims(int height, int width, int channels) {
    if (height < 1 || width < 1) {
        throw ShapeError("image dimensions must be positive, got " + std::to_string(height) + "x" +
                         std::to_string(width));
    }
    if (channels != 1 && channels != 3) {
        throw ShapeError("image must have 1 or 3 channels, got " + std::to_string(channels));
    }
}

std::string lower_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return ext;
}

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f != nullptr) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

Image decode_png(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw IoError("cannot open " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png == nullptr) throw IoError("libpng: out of memory");
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng: out of memory");
    }

    std::vector<png_bytep> rows;
    std::vector<std::uint8_t> pixels;
    // libpng reports errors via longjmp; nothing with a non-trivial destructor may
    // be created between setjmp and the end of decoding except the vectors above.
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("cannot decode PNG " + path.string());
    }

    png_init_io(png, file.get());
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int color_type = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int out_channels = png_get_channels(png, info);
    const std::size_t row_bytes = png_get_rowbytes(png, info);
    pixels.resize(row_bytes * height);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + y * row_bytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    if (width == 0 || height == 0) throw IoError("zero-dimension raster " + path.string());
    if (out_channels != 1 && out_channels != 3) {
        throw IoError("unsupported PNG channel layout in " + path.string());
    }

    Image img(static_cast<int>(height), static_cast<int>(width), out_channels);
    for (int y = 0; y < static_cast<int>(height); ++y) {
        for (int x = 0; x < static_cast<int>(width); ++x) {
            for (int c = 0; c < out_channels; ++c) {
                img.at(c, y, x) = pixels[y * row_bytes + static_cast<std::size_t>(x) * out_channels + c] / 255.0;
            }
        }
    }
    return img;
}

void encode_png(const std::filesystem::path& path, const Image& image) {
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) throw IoError("cannot write " + path.string());

    const int channels = image.channels();
    const std::size_t row_bytes = static_cast<std::size_t>(image.width()) * channels;
    std::vector<std::uint8_t> pixels(row_bytes * image.height());
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < channels; ++c) {
                pixels[y * row_bytes + static_cast<std::size_t>(x) * channels + c] = to_byte(image.at(c, y, x));
            }
        }
    }
    std::vector<png_bytep> rows(image.height());
    for (int y = 0; y < image.height(); ++y) rows[y] = pixels.data() + y * row_bytes;

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png == nullptr) throw IoError("libpng: out of memory");
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng: out of memory");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("cannot encode PNG " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, image.width(), image.height(), 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// Binary PGM (P5) / PPM (P6), maxval up to 65535.
Image decode_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());

    auto next_token = [&]() {
        std::string token;
        char ch = 0;
        while (in.get(ch)) {
            if (ch == '#') {
                std::string skip;
                std::getline(in, skip);
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(ch))) {
                if (!token.empty()) break;
                continue;
            }
            token.push_back(ch);
        }
        return token;
    };

    const std::string magic = next_token();
    int channels = 0;
    if (magic == "P5") channels = 1;
    else if (magic == "P6") channels = 3;
    else throw IoError("unsupported PNM variant in " + path.string());

    int width = 0;
    int height = 0;
    int maxval = 0;
    try {
        width = std::stoi(next_token());
        height = std::stoi(next_token());
        maxval = std::stoi(next_token());
    } catch (const std::exception&) {
        throw IoError("malformed PNM header in " + path.string());
    }
    if (width <= 0 || height <= 0) throw IoError("zero-dimension raster " + path.string());
    if (maxval <= 0 || maxval > 65535) throw IoError("bad PNM maxval in " + path.string());

    const int bytes_per_sample = maxval > 255 ? 2 : 1;
    const std::size_t count = static_cast<std::size_t>(width) * height * channels;
    std::vector<unsigned char> raw(count * bytes_per_sample);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw IoError("truncated PNM data in " + path.string());

    Image img(height, width, channels);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < channels; ++c) {
                const std::size_t i = (static_cast<std::size_t>(y) * width + x) * channels + c;
                const int v = bytes_per_sample == 1 ? raw[i] : (raw[2 * i] << 8) | raw[2 * i + 1];
                img.at(c, y, x) = static_cast<double>(v) / maxval;
            }
        }
    }
    return img;
}

void encode_pnm(const std::filesystem::path& path, const Image& image, int channels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << (channels == 1 ? "P5" : "P6") << '\n' << image.width() << ' ' << image.height() << "\n255\n";
    std::vector<std::uint8_t> bytes;
    bytes.reserve(image.plane_size() * channels);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < channels; ++c) {
                // PGM from a colour image stores the channel mean.
                const double v = (channels == image.channels())
                                     ? image.at(c, y, x)
                                     : (image.at(0, y, x) + image.at(1, y, x) + image.at(2, y, x)) / 3.0;
                bytes.push_back(to_byte(v));
            }
        }
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

} // namespace

Image::Image(int height, int width, int channels, double fill) : height_(height), width_(width), channels_(channels) {
    check_dims(height, width, channels);
    data_.assign(plane_size() * channels, fill);
}

Image::Image(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    check_dims(height, width, channels);
    if (data_.size() != plane_size() * channels) {
        throw ShapeError("image data length does not match " + std::to_string(height) + "x" + std::to_string(width) +
                         "x" + std::to_string(channels));
    }
}

Image load_image(const std::filesystem::path& path, bool replicate_to_rgb) {
    if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());

    std::ifstream probe(path, std::ios::binary);
    std::array<unsigned char, 8> magic{};
    probe.read(reinterpret_cast<char*>(magic.data()), magic.size());
    const auto got = probe.gcount();
    probe.close();

    Image img;
    if (got >= 8 && png_sig_cmp(magic.data(), 0, 8) == 0) {
        img = decode_png(path);
    } else if (got >= 2 && magic[0] == 'P' && (magic[1] == '5' || magic[1] == '6')) {
        img = decode_pnm(path);
    } else {
        throw IoError("unrecognised raster format: " + path.string());
    }
    return replicate_to_rgb ? to_rgb(img) : img;
}

void save_image(const std::filesystem::path& path, const Image& image) {
    if (image.empty()) throw ShapeError("cannot save an empty image");
    const std::string ext = lower_extension(path);
    if (ext == ".png") {
        encode_png(path, image);
    } else if (ext == ".pgm") {
        encode_pnm(path, image, 1);
    } else if (ext == ".ppm") {
        encode_pnm(path, to_rgb(image), 3);
    } else {
        throw IoError("unsupported output extension '" + ext + "' for " + path.string());
    }
}

Image to_rgb(const Image& image) {
    if (image.channels() == 3) return image;
    Image out(image.height(), image.width(), 3);
    for (int c = 0; c < 3; ++c) std::ranges::copy(image.plane(0), out.plane(c).begin());
    return out;
}

Image quantize_8bit(const Image& image) {
    Image out = image;
    for (double& v : out.data()) v = to_byte(v) / 255.0;
    return out;
}

Image clamp01(Image image) {
    for (double& v : image.data()) v = std::clamp(v, 0.0, 1.0);
    return image;
}

Image resize_bilinear(const Image& image, int height, int width) {
    if (height < 1 || width < 1) throw ShapeError("resize target must be positive");
    if (image.height() == height && image.width() == width) return image;

    Image out(height, width, image.channels());
    const double sy = static_cast<double>(image.height()) / height;
    const double sx = static_cast<double>(image.width()) / width;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(image.height() - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, image.height() - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(image.width() - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, image.width() - 1);
            const double wx = fx - x0;
            for (int c = 0; c < image.channels(); ++c) {
                const double top = image.at(c, y0, x0) * (1 - wx) + image.at(c, y0, x1) * wx;
                const double bottom = image.at(c, y1, x0) * (1 - wx) + image.at(c, y1, x1) * wx;
                out.at(c, y, x) = top * (1 - wy) + bottom * wy;
            }
        }
    }
    return out;
}

Image crop(const Image& image, int x0, int y0, int x1, int y1) {
    if (x0 < 0 || y0 < 0 || x1 >= image.width() || y1 >= image.height() || x0 > x1 || y0 > y1) {
        throw ShapeError("crop rectangle outside image");
    }
    Image out(y1 - y0 + 1, x1 - x0 + 1, image.channels());
    for (int c = 0; c < image.channels(); ++c) {
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) out.at(c, y - y0, x - x0) = image.at(c, y, x);
        }
    }
    return out;
}

PatchGrid decompose_patches(const Image& image, int patch_size) {
    if (patch_size < 4) throw ConfigError("patch size must be >= 4");
    if (image.empty()) throw ShapeError("cannot tile an empty image");
    if (patch_size > 4 * std::max(image.height(), image.width())) {
        throw ConfigError("patch size " + std::to_string(patch_size) + " exceeds 4x the image extent");
    }

    PatchGrid grid;
    grid.patch_size = patch_size;
    grid.original_height = image.height();
    grid.original_width = image.width();
    grid.rows = (image.height() + patch_size - 1) / patch_size;
    grid.cols = (image.width() + patch_size - 1) / patch_size;
    grid.pad_bottom = grid.rows * patch_size - image.height();
    grid.pad_right = grid.cols * patch_size - image.width();
    grid.patches.reserve(static_cast<std::size_t>(grid.rows) * grid.cols);

    for (int r = 0; r < grid.rows; ++r) {
        for (int q = 0; q < grid.cols; ++q) {
            Image patch(patch_size, patch_size, image.channels());
            for (int c = 0; c < image.channels(); ++c) {
                for (int y = 0; y < patch_size; ++y) {
                    const int sy = reflect_index(r * patch_size + y, image.height());
                    for (int x = 0; x < patch_size; ++x) {
                        patch.at(c, y, x) = image.at(c, sy, reflect_index(q * patch_size + x, image.width()));
                    }
                }
            }
            grid.patches.push_back(std::move(patch));
        }
    }
    return grid;
}

Image reassemble_patches(const PatchGrid& grid) {
    const int p = grid.patch_size;
    if (p < 1 || grid.rows < 1 || grid.cols < 1 ||
        grid.patches.size() != static_cast<std::size_t>(grid.rows) * grid.cols ||
        grid.original_height + grid.pad_bottom != grid.rows * p ||
        grid.original_width + grid.pad_right != grid.cols * p || grid.pad_bottom < 0 || grid.pad_right < 0) {
        throw ShapeError("inconsistent patch grid metadata");
    }
    const int channels = grid.patches.front().channels();
    for (const Image& patch : grid.patches) {
        if (patch.height() != p || patch.width() != p || patch.channels() != channels) {
            throw ShapeError("patch shape does not match grid");
        }
    }

    Image out(grid.original_height, grid.original_width, channels);
    for (int c = 0; c < channels; ++c) {
        for (int y = 0; y < grid.original_height; ++y) {
            const int r = y / p;
            for (int x = 0; x < grid.original_width; ++x) {
                const int q = x / p;
                out.at(c, y, x) = grid.patches[static_cast<std::size_t>(r) * grid.cols + q].at(c, y % p, x % p);
            }
        }
    }
    return out;
}

Image perturb_gaussian(const Image& patch, double std, std::uint64_t seed) {
    if (!(std >= 0.0)) throw ConfigError("noise std must be non-negative");
    if (std == 0.0) return patch;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, std);
    Image out = patch;
    for (double& v : out.data()) v = std::clamp(v + noise(rng), 0.0, 1.0);
    return out;
}

} // namespace anoseg
