#include "ssdda/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_set>

#include "ssdda/errors.hpp"
#include "ssdda/pnm.hpp"

namespace ssdda {

namespace {

// Per-class base colors (background, circle, rectangle, triangle, stripe),
// chosen well separated in RGB so the classes are learnable from color alone.
constexpr std::array<std::array<double, 3>, 5> kBaseColors = {{
    {0.42, 0.46, 0.40},
    {0.85, 0.22, 0.20},
    {0.20, 0.34, 0.86},
    {0.92, 0.80, 0.16},
    {0.66, 0.22, 0.76},
}};

// Fixed strength of the sinusoidal texture overlay; the configurable knob is
// its frequency (0 disables the component entirely).
constexpr double kTextureAmplitude = 0.05;

// Half-width of the uniform per-shape color jitter around the base colors.
// Kept small: classes must stay well separated in color space, otherwise
// consistency training destabilizes (pseudo-labels collapse on some seeds).
constexpr double kColorJitter = 0.06;

// Seed-stream tags (arbitrary distinct constants fed to mix_seed).
constexpr std::uint64_t kTagSource = 0xd05;
constexpr std::uint64_t kTagTarget = 0xda6;
constexpr std::uint64_t kTagSplit = 0x5b117;

constexpr int kSceneRedrawLimit = 64;

struct Shape {
    int cls = 0; // 1 circle, 2 rectangle, 3 triangle, 4 stripe
    // circle: cx, cy, r | rectangle: cx, cy, hw, hh
    // triangle: ax, ay, bx, by, cx, cy | stripe: ax, ay, cos, sin, halfwidth
    std::array<double, 6> p{};
    std::array<double, 3> color{};

    bool covers(double x, double y) const {
        switch (cls) {
        case 1: {
            const double dx = x - p[0], dy = y - p[1];
            return dx * dx + dy * dy <= p[2] * p[2];
        }
        case 2:
            return std::abs(x - p[0]) <= p[2] && std::abs(y - p[1]) <= p[3];
        case 3: {
            const auto edge = [](double x0, double y0, double x1, double y1, double px,
                                 double py) {
                return (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0);
            };
            const double d0 = edge(p[0], p[1], p[2], p[3], x, y);
            const double d1 = edge(p[2], p[3], p[4], p[5], x, y);
            const double d2 = edge(p[4], p[5], p[0], p[1], x, y);
            const bool any_neg = d0 < 0 || d1 < 0 || d2 < 0;
            const bool any_pos = d0 > 0 || d1 > 0 || d2 > 0;
            return !(any_neg && any_pos);
        }
        case 4:
            return std::abs((x - p[0]) * p[2] + (y - p[1]) * p[3]) <= p[4];
        default:
            return false;
        }
    }
};

std::array<double, 3> jittered_color(int cls, Rng& rng) {
    std::array<double, 3> c = kBaseColors[static_cast<std::size_t>(cls)];
    for (double& v : c)
        v = std::clamp(v + rng.uniform(-kColorJitter, kColorJitter), 0.0, 1.0);
    return c;
}

Shape draw_shape(const SceneSpec& spec, Rng& rng) {
    const double W = spec.width, H = spec.height;
    const double m = std::min(W, H);
    Shape s;
    s.cls = static_cast<int>(rng.uniform_range(1, 4));
    switch (s.cls) {
    case 1: {
        const double r = rng.uniform(0.09, 0.20) * m;
        s.p = {rng.uniform(r, W - r), rng.uniform(r, H - r), r, 0, 0, 0};
        break;
    }
    case 2: {
        const double hw = rng.uniform(0.10, 0.22) * W;
        const double hh = rng.uniform(0.10, 0.22) * H;
        s.p = {rng.uniform(hw, W - hw), rng.uniform(hh, H - hh), hw, hh, 0, 0};
        break;
    }
    case 3: {
        const double bw = rng.uniform(0.10, 0.22) * W;
        const double th = rng.uniform(0.18, 0.40) * H;
        const double cx = rng.uniform(bw, W - bw);
        const double y0 = rng.uniform(0.0, H - th);
        const double apex = cx + rng.uniform(-0.5, 0.5) * bw;
        s.p = {apex, y0, cx - bw, y0 + th, cx + bw, y0 + th};
        break;
    }
    default: {
        const double theta = rng.uniform(0.0, std::numbers::pi);
        const double ax = rng.uniform(0.25, 0.75) * W;
        const double ay = rng.uniform(0.25, 0.75) * H;
        s.p = {ax, ay, std::cos(theta), std::sin(theta), rng.uniform(0.05, 0.10) * m, 0};
        break;
    }
    }
    s.color = jittered_color(s.cls, rng);
    return s;
}

void apply_domain_shift(SegImage& img, const DomainShift& shift, Rng& rng) {
    const int H = img.height, W = img.width;
    if (shift.hue_rotation_deg != 0.0) {
        // Rotation about the gray axis (1,1,1)/sqrt(3) keeps luminance while
        // displacing hue -- a pure appearance change.
        const double th = shift.hue_rotation_deg * std::numbers::pi / 180.0;
        const double c = std::cos(th), s = std::sin(th);
        const double rs = 1.0 / std::sqrt(3.0);
        for (std::size_t i = 0; i < img.data.size(); i += 3) {
            const double r = img.data[i], g = img.data[i + 1], b = img.data[i + 2];
            const double dot = (r + g + b) / 3.0;
            img.data[i] = r * c + (b - g) * rs * s + dot * (1.0 - c);
            img.data[i + 1] = g * c + (r - b) * rs * s + dot * (1.0 - c);
            img.data[i + 2] = b * c + (g - r) * rs * s + dot * (1.0 - c);
        }
    }
    if (shift.noise_sigma > 0.0)
        for (double& v : img.data)
            v += shift.noise_sigma * rng.normal();
    if (shift.brightness_gradient != 0.0) {
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const double t = W > 1 ? static_cast<double>(x) / (W - 1) : 0.0;
                double* px = img.data.data() + (static_cast<std::size_t>(y) * W + x) * 3;
                for (int ch = 0; ch < 3; ++ch)
                    px[ch] += shift.brightness_gradient * (t - 0.5);
            }
    }
    if (shift.texture_frequency > 0.0) {
        const double fx = 2.0 * std::numbers::pi * shift.texture_frequency / W;
        const double fy = 2.0 * std::numbers::pi * shift.texture_frequency / H;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const double t =
                    kTextureAmplitude * std::sin(fx * (x + 0.5)) * std::sin(fy * (y + 0.5));
                double* px = img.data.data() + (static_cast<std::size_t>(y) * W + x) * 3;
                for (int ch = 0; ch < 3; ++ch)
                    px[ch] += t;
            }
    }
    for (double& v : img.data)
        v = std::clamp(v, 0.0, 1.0);
}

std::string padded_id(const char* prefix, int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%04d", prefix, index);
    return buf;
}

std::string trim_line(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos)
        return {};
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

} // namespace

std::string to_string(Domain d) {
    return d == Domain::source ? "source" : "target";
}

Domain domain_from_string(const std::string& s) {
    if (s == "source")
        return Domain::source;
    if (s == "target")
        return Domain::target;
    throw FormatError("unknown domain: " + s);
}

void SceneSpec::validate() const {
    if (height < 8 || width < 8)
        throw InvalidConfig("scene canvas must be at least 8x8");
    if (num_classes != 5)
        throw InvalidConfig("the shape rasterizer defines exactly 5 classes");
    if (min_shapes < 0 || max_shapes < min_shapes)
        throw InvalidConfig("need 0 <= min_shapes <= max_shapes");
}

std::pair<SegImage, LabelMap> generate_scene(const SceneSpec& spec, Domain domain,
                                             const DomainShift& shift, Rng& rng) {
    spec.validate();
    const int H = spec.height, W = spec.width;
    SegImage img(H, W, 3);
    LabelMap lab(H, W);
    std::vector<int> visible;

    for (int attempt = 0;; ++attempt) {
        if (attempt >= kSceneRedrawLimit)
            throw NumericError("generate_scene: could not place fully visible shapes");
        const auto bg = jittered_color(0, rng);
        const int n = static_cast<int>(
            rng.uniform_range(static_cast<std::uint64_t>(spec.min_shapes),
                              static_cast<std::uint64_t>(spec.max_shapes)));
        std::vector<Shape> shapes;
        shapes.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            shapes.push_back(draw_shape(spec, rng));

        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const std::size_t pix = static_cast<std::size_t>(y) * W + x;
                img.data[pix * 3] = bg[0];
                img.data[pix * 3 + 1] = bg[1];
                img.data[pix * 3 + 2] = bg[2];
                lab.data[pix] = 0;
            }
        // Painter's order: later shapes overdraw earlier ones; owner tracks
        // which shape ends up on top of each pixel.
        std::vector<int> owner(static_cast<std::size_t>(H) * W, -1);
        for (std::size_t si = 0; si < shapes.size(); ++si) {
            const Shape& s = shapes[si];
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    if (!s.covers(x + 0.5, y + 0.5))
                        continue;
                    const std::size_t pix = static_cast<std::size_t>(y) * W + x;
                    img.data[pix * 3] = s.color[0];
                    img.data[pix * 3 + 1] = s.color[1];
                    img.data[pix * 3 + 2] = s.color[2];
                    lab.data[pix] = static_cast<std::uint8_t>(s.cls);
                    owner[pix] = static_cast<int>(si);
                }
        }
        // Fully occluded shapes would break the "every shape is visible"
        // guarantee; redraw the scene if any lost all its pixels.
        visible.assign(shapes.size(), 0);
        for (const int o : owner)
            if (o >= 0)
                ++visible[static_cast<std::size_t>(o)];
        if (std::all_of(visible.begin(), visible.end(), [](int v) { return v > 0; }))
            break;
    }

    if (domain == Domain::target)
        apply_domain_shift(img, shift, rng);
    return {std::move(img), std::move(lab)};
}

int DatasetManifest::n_source() const {
    return static_cast<int>(std::count_if(items.begin(), items.end(), [](const ManifestItem& i) {
        return i.domain == Domain::source;
    }));
}

int DatasetManifest::n_target() const {
    return static_cast<int>(items.size()) - n_source();
}

std::vector<std::string> DatasetManifest::target_ids() const {
    std::vector<std::string> ids;
    for (const auto& i : items)
        if (i.domain == Domain::target)
            ids.push_back(i.id);
    return ids;
}

void DatasetManifest::validate(bool check_files) const {
    std::unordered_set<std::string> seen;
    for (const auto& i : items) {
        if (!seen.insert(i.id).second)
            throw FormatError("manifest: duplicate id " + i.id);
        if (check_files) {
            for (const auto& rel : {i.image_path, i.label_path})
                if (!std::filesystem::exists(root / rel))
                    throw IoError("manifest: missing file " + (root / rel).string());
        }
    }
}

DatasetManifest generate_dataset(const SceneSpec& spec, const DomainShift& shift,
                                 const DatasetCounts& counts,
                                 const std::filesystem::path& out_dir, std::uint64_t seed) {
    spec.validate();
    if (counts.n_source < 0 || counts.n_target < 0)
        throw InvalidConfig("dataset counts must be non-negative");
    std::filesystem::create_directories(out_dir / "images");
    std::filesystem::create_directories(out_dir / "labels");

    DatasetManifest manifest;
    manifest.root = out_dir;
    manifest.num_classes = spec.num_classes;
    const auto emit = [&](Domain domain, std::uint64_t tag, int index) {
        const std::string id = padded_id(domain == Domain::source ? "source" : "target", index);
        Rng rng(mix_seed(mix_seed(seed, tag), static_cast<std::uint64_t>(index)));
        auto [img, lab] = generate_scene(spec, domain, shift, rng);
        const std::string image_rel = "images/" + id + ".ppm";
        const std::string label_rel = "labels/" + id + ".pgm";
        write_ppm(out_dir / image_rel, img);
        write_pgm(out_dir / label_rel, lab);
        manifest.items.push_back({id, domain, image_rel, label_rel});
    };
    for (int i = 0; i < counts.n_source; ++i)
        emit(Domain::source, kTagSource, i);
    for (int i = 0; i < counts.n_target; ++i)
        emit(Domain::target, kTagTarget, i);
    save_manifest(manifest);
    return manifest;
}

void save_manifest(const DatasetManifest& manifest) {
    const auto path = manifest.root / "manifest.txt";
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    for (const auto& i : manifest.items)
        out << i.id << '\t' << to_string(i.domain) << '\t' << i.image_path << '\t'
            << i.label_path << '\n';
    if (!out)
        throw IoError("write failed for " + path.string());
}

DatasetManifest load_manifest(const std::filesystem::path& root) {
    const auto path = root / "manifest.txt";
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    DatasetManifest manifest;
    manifest.root = root;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_line(line).empty())
            continue;
        std::istringstream fields(line);
        ManifestItem item;
        std::string domain;
        if (!std::getline(fields, item.id, '\t') || !std::getline(fields, domain, '\t') ||
            !std::getline(fields, item.image_path, '\t') ||
            !std::getline(fields, item.label_path))
            throw FormatError(path.string() + ":" + std::to_string(line_no) +
                              ": expected id<TAB>domain<TAB>image<TAB>label");
        item.label_path = trim_line(item.label_path);
        item.domain = domain_from_string(domain);
        manifest.items.push_back(std::move(item));
    }
    manifest.validate(/*check_files=*/true);
    return manifest;
}

SplitSpec make_splits(const DatasetManifest& manifest, int n_labeled, double val_fraction,
                      std::uint64_t seed) {
    if (!(val_fraction >= 0.0 && val_fraction < 1.0))
        throw InvalidConfig("val_fraction must lie in [0, 1)");
    auto ids = manifest.target_ids();
    const int n_target = static_cast<int>(ids.size());
    const int n_val = static_cast<int>(std::llround(val_fraction * n_target));
    if (n_labeled < 0 || n_labeled > n_target - n_val)
        throw InvalidSplit("cannot take " + std::to_string(n_labeled) + " labeled targets from " +
                           std::to_string(n_target - n_val) + " non-validation items");

    Rng rng(mix_seed(seed, kTagSplit));
    rng.shuffle(ids);
    SplitSpec split;
    split.seed = seed;
    split.val.assign(ids.begin(), ids.begin() + n_val);
    split.labeled.assign(ids.begin() + n_val, ids.begin() + n_val + n_labeled);
    split.unlabeled.assign(ids.begin() + n_val + n_labeled, ids.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.labeled.begin(), split.labeled.end());
    std::sort(split.unlabeled.begin(), split.unlabeled.end());
    return split;
}

void check_split(const DatasetManifest& manifest, const SplitSpec& split) {
    std::vector<std::string> all;
    all.reserve(split.labeled.size() + split.unlabeled.size() + split.val.size());
    all.insert(all.end(), split.labeled.begin(), split.labeled.end());
    all.insert(all.end(), split.unlabeled.begin(), split.unlabeled.end());
    all.insert(all.end(), split.val.begin(), split.val.end());
    std::sort(all.begin(), all.end());
    if (std::adjacent_find(all.begin(), all.end()) != all.end())
        throw InvalidSplit("split sections are not disjoint");
    auto targets = manifest.target_ids();
    std::sort(targets.begin(), targets.end());
    if (all != targets)
        throw InvalidSplit("split sections do not cover the manifest's target ids");
}

void save_split(const std::filesystem::path& path, const SplitSpec& split) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    const auto section = [&](const char* name, const std::vector<std::string>& ids) {
        out << '[' << name << "]\n";
        for (const auto& id : ids)
            out << id << '\n';
    };
    section("labeled", split.labeled);
    section("unlabeled", split.unlabeled);
    section("val", split.val);
    if (!out)
        throw IoError("write failed for " + path.string());
}

SplitSpec load_split(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open split file " + path.string());
    SplitSpec split;
    std::vector<std::string>* section = nullptr;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim_line(line);
        if (t.empty())
            continue;
        if (t == "[labeled]")
            section = &split.labeled;
        else if (t == "[unlabeled]")
            section = &split.unlabeled;
        else if (t == "[val]")
            section = &split.val;
        else if (t.front() == '[')
            throw FormatError(path.string() + ":" + std::to_string(line_no) +
                              ": unknown section " + t);
        else if (!section)
            throw FormatError(path.string() + ":" + std::to_string(line_no) +
                              ": id before any section header");
        else
            section->push_back(t);
    }
    return split;
}

const LoadedItem& LoadedDataset::target_item(const std::string& id) const {
    const auto it = target_index.find(id);
    if (it == target_index.end())
        throw InvalidSplit("split references unknown target id: " + id);
    return target[it->second];
}

LoadedDataset load_dataset(const DatasetManifest& manifest) {
    LoadedDataset d;
    int max_label = 1;
    for (const auto& item : manifest.items) {
        LoadedItem li;
        li.id = item.id;
        li.image = read_ppm(manifest.root / item.image_path);
        li.label = read_pgm(manifest.root / item.label_path);
        if (li.image.height != li.label.height || li.image.width != li.label.width)
            throw FormatError("image/label shape mismatch for id " + item.id);
        for (const std::uint8_t id : li.label.data)
            if (id != kIgnoreLabel)
                max_label = std::max(max_label, static_cast<int>(id));
        if (item.domain == Domain::source) {
            d.source.push_back(std::move(li));
        } else {
            d.target_index.emplace(item.id, d.target.size());
            d.target.push_back(std::move(li));
        }
    }
    // The manifest format carries no class count; the smallest count
    // consistent with the labels on disk is used.
    d.num_classes = max_label + 1;
    return d;
}

Batch sample_batch(const LoadedDataset& dataset, const SplitSpec& split, Rng& rng) {
    if (dataset.source.empty())
        throw InvalidSplit("sample_batch: dataset has no source items");
    if (split.labeled.size() < 2 || split.unlabeled.size() < 2)
        throw InvalidSplit("sample_batch: need >= 2 labeled and >= 2 unlabeled target items");
    Batch b;
    const LoadedItem& s = dataset.source[rng.uniform_int(dataset.source.size())];
    b.source_image = &s.image;
    b.source_label = &s.label;
    for (int i = 0; i < 2; ++i) {
        const LoadedItem& t =
            dataset.target_item(split.labeled[rng.uniform_int(split.labeled.size())]);
        b.target_images[static_cast<std::size_t>(i)] = &t.image;
        b.target_labels[static_cast<std::size_t>(i)] = &t.label;
    }
    const std::uint64_t n = split.unlabeled.size();
    const std::uint64_t a = rng.uniform_int(n);
    std::uint64_t bb = rng.uniform_int(n);
    while (bb == a) // the mixing pair must be two different images
        bb = rng.uniform_int(n);
    b.unlabeled_images[0] = &dataset.target_item(split.unlabeled[a]).image;
    b.unlabeled_images[1] = &dataset.target_item(split.unlabeled[bb]).image;
    return b;
}

} // namespace ssdda
