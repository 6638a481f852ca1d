#include "kbd/pointcloud.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string_view>

namespace kbd {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CloudError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw CloudError("read error on '" + path.string() + "'");
    return ss.str();
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

double parse_number(std::string_view field, std::size_t line_no) {
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    double value = 0.0;
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc() || ptr != end)
        throw CloudError("line " + std::to_string(line_no) + ": malformed number '" + std::string(field) + "'",
                         line_no);
    if (!std::isfinite(value))
        throw CloudError("line " + std::to_string(line_no) + ": non-finite value '" + std::string(field) + "'",
                         line_no);
    return value;
}

template <typename F>
void for_each_line(const std::string& text, F&& fn) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        ++line_no;
        if (!fn(std::string_view(text).substr(pos, nl - pos), line_no)) return;
        pos = nl + 1;
    }
}

double checked_intensity(double value, std::size_t line_no) {
    if (value < 0.0 || value > 1.0)
        throw CloudError("line " + std::to_string(line_no) + ": intensity outside [0,1]", line_no);
    return value;
}

}  // namespace

CloudError::CloudError(const std::string& what, std::size_t line) : std::runtime_error(what), line_(line) {}

PointCloud PointCloud::subset(const std::vector<std::size_t>& indices) const {
    PointCloud out;
    out.points.reserve(indices.size());
    for (std::size_t i : indices) out.points.push_back(points[i]);
    if (has_intensity()) {
        out.intensities.reserve(indices.size());
        for (std::size_t i : indices) out.intensities.push_back(intensities[i]);
    }
    return out;
}

CloudFormat format_from_path(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".ply" ? CloudFormat::PlyAscii : CloudFormat::XyzAscii;
}

PointCloud parse_xyz(const std::string& text) {
    PointCloud cloud;
    int columns = -1;
    for_each_line(text, [&](std::string_view line, std::size_t line_no) {
        auto fields = split_fields(line);
        if (fields.empty() || fields.front().front() == '#') return true;
        if (fields.size() < 3)
            throw CloudError("line " + std::to_string(line_no) + ": expected at least 3 fields", line_no);
        const int n = static_cast<int>(fields.size());
        if (columns < 0) columns = n;
        if (n != columns)
            throw CloudError("line " + std::to_string(line_no) + ": inconsistent column count", line_no);
        cloud.points.emplace_back(parse_number(fields[0], line_no), parse_number(fields[1], line_no),
                                  parse_number(fields[2], line_no));
        // x y z i; wider rows (colors) are accepted and the extras ignored.
        if (n == 4) cloud.intensities.push_back(checked_intensity(parse_number(fields[3], line_no), line_no));
        return true;
    });
    return cloud;
}

PointCloud parse_ply(const std::string& text) {
    struct Element {
        std::string name;
        std::size_t count = 0;
        std::vector<std::string> properties;
        bool has_list = false;
    };
    std::vector<Element> elements;
    bool header_done = false;
    bool saw_magic = false;
    std::size_t body_start_line = 0;

    for_each_line(text, [&](std::string_view line, std::size_t line_no) {
        auto fields = split_fields(line);
        if (!saw_magic) {
            if (fields.size() != 1 || fields[0] != "ply") throw CloudError("line 1: missing 'ply' magic", line_no);
            saw_magic = true;
            return true;
        }
        if (fields.empty()) return true;
        const auto key = fields[0];
        if (key == "format") {
            if (fields.size() < 3 || fields[1] != "ascii")
                throw CloudError("line " + std::to_string(line_no) + ": only ASCII PLY is supported", line_no);
        } else if (key == "comment" || key == "obj_info") {
        } else if (key == "element") {
            if (fields.size() != 3)
                throw CloudError("line " + std::to_string(line_no) + ": malformed element line", line_no);
            Element e;
            e.name = std::string(fields[1]);
            auto [p, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), e.count);
            if (ec != std::errc() || p != fields[2].data() + fields[2].size())
                throw CloudError("line " + std::to_string(line_no) + ": bad element count", line_no);
            elements.push_back(std::move(e));
        } else if (key == "property") {
            if (elements.empty() || fields.size() < 3)
                throw CloudError("line " + std::to_string(line_no) + ": property outside an element", line_no);
            if (fields[1] == "list") {
                elements.back().has_list = true;
                elements.back().properties.emplace_back(fields.back());
            } else {
                elements.back().properties.emplace_back(fields[2]);
            }
        } else if (key == "end_header") {
            header_done = true;
            body_start_line = line_no + 1;
            return false;
        } else {
            throw CloudError("line " + std::to_string(line_no) + ": unknown header keyword '" + std::string(key) + "'",
                             line_no);
        }
        return true;
    });
    if (!saw_magic) return {};
    if (!header_done) throw CloudError("PLY header not terminated by end_header");

    PointCloud cloud;
    std::size_t element_index = 0;
    std::size_t consumed = 0;
    int ix = -1, iy = -1, iz = -1, ii = -1;
    auto bind_element = [&] {
        while (element_index < elements.size() && elements[element_index].count == 0) ++element_index;
        if (element_index >= elements.size()) return;
        const auto& e = elements[element_index];
        if (e.name != "vertex") return;
        if (e.has_list) throw CloudError("vertex element with list property is not supported");
        ix = iy = iz = ii = -1;
        for (std::size_t k = 0; k < e.properties.size(); ++k) {
            const auto& name = e.properties[k];
            if (name == "x") ix = static_cast<int>(k);
            if (name == "y") iy = static_cast<int>(k);
            if (name == "z") iz = static_cast<int>(k);
            if (name == "intensity") ii = static_cast<int>(k);
        }
        if (ix < 0 || iy < 0 || iz < 0) throw CloudError("vertex element lacks x/y/z properties");
    };
    bind_element();

    for_each_line(text, [&](std::string_view line, std::size_t line_no) {
        if (line_no < body_start_line) return true;
        if (element_index >= elements.size()) return false;
        auto fields = split_fields(line);
        if (fields.empty()) return true;
        const auto& e = elements[element_index];
        if (e.name == "vertex") {
            if (fields.size() != e.properties.size())
                throw CloudError("line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(e.properties.size()) + " vertex fields",
                                 line_no);
            cloud.points.emplace_back(parse_number(fields[ix], line_no), parse_number(fields[iy], line_no),
                                      parse_number(fields[iz], line_no));
            if (ii >= 0) cloud.intensities.push_back(checked_intensity(parse_number(fields[ii], line_no), line_no));
        }
        if (++consumed == e.count) {
            consumed = 0;
            ++element_index;
            bind_element();
        }
        return true;
    });
    while (element_index < elements.size() && elements[element_index].count == 0) ++element_index;
    if (element_index < elements.size()) throw CloudError("PLY body ended before all elements were read");
    return cloud;
}

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format) {
    const std::string text = read_file(path);
    return format == CloudFormat::PlyAscii ? parse_ply(text) : parse_xyz(text);
}

PointCloud load_cloud(const std::filesystem::path& path) { return load_cloud(path, format_from_path(path)); }

std::string format_xyz(const PointCloud& cloud, int precision) {
    std::string out;
    out.reserve(cloud.size() * 32);
    char buf[128];
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto& p = cloud.points[i];
        int n = cloud.has_intensity()
                    ? std::snprintf(buf, sizeof buf, "%.*f %.*f %.*f %.*f\n", precision, p.x(), precision, p.y(),
                                    precision, p.z(), precision, cloud.intensities[i])
                    : std::snprintf(buf, sizeof buf, "%.*f %.*f %.*f\n", precision, p.x(), precision, p.y(),
                                    precision, p.z());
        out.append(buf, static_cast<std::size_t>(n));
    }
    return out;
}

void save_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format, int precision) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CloudError("cannot write '" + path.string() + "'");
    if (format == CloudFormat::PlyAscii) {
        out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
            << "\nproperty double x\nproperty double y\nproperty double z\n";
        if (cloud.has_intensity()) out << "property double intensity\n";
        out << "end_header\n";
    }
    out << format_xyz(cloud, precision);
    if (!out) throw CloudError("write error on '" + path.string() + "'");
}

Aabb cloud_bounds(const PointCloud& cloud) {
    if (cloud.empty()) throw std::invalid_argument("cloud_bounds: empty cloud");
    Aabb box{cloud.points.front(), cloud.points.front()};
    for (const auto& p : cloud.points) {
        box.min = box.min.cwiseMin(p);
        box.max = box.max.cwiseMax(p);
    }
    return box;
}

PointCloud crop_to_box(const PointCloud& cloud, const BoundingBox& box, double margin) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (box.contains(cloud.points[i], margin)) keep.push_back(i);
    return cloud.subset(keep);
}

std::uint64_t cloud_fingerprint(const PointCloud& cloud) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* data, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ull;
        }
    };
    const std::uint64_t n = cloud.size();
    mix(&n, sizeof n);
    for (const auto& p : cloud.points) mix(p.data(), 3 * sizeof(double));
    return h;
}

}  // namespace kbd
