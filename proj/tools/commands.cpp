#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include <json.hpp>

#include "carfit/alignment.hpp"
#include "carfit/point_grid.hpp"
#include "carfit/rng.hpp"
#include "carfit/synthetic.hpp"

namespace carfit::cli {

using nlohmann::json;

namespace {

void check_keys(const json& object, const std::string& section,
                const std::set<std::string>& allowed) {
    require(object.is_object(), errc::parse_error, "config section '" + section +
                                                       "' must be an object");
    for (const auto& [key, value] : object.items())
        require(allowed.count(key) > 0, errc::parse_error,
                "unknown config key '" + section + (section.empty() ? "" : ".") + key + "'");
}

json pose_to_json(const Pose& pose) {
    return json{{"rotation",
                 {pose.rotation.w(), pose.rotation.x(), pose.rotation.y(), pose.rotation.z()}},
                {"translation",
                 {pose.translation.x(), pose.translation.y(), pose.translation.z()}}};
}

Pose pose_from_json(const json& j) {
    check_keys(j, "pose", {"rotation", "translation"});
    const auto& q = j.at("rotation");
    const auto& t = j.at("translation");
    require(q.is_array() && q.size() == 4 && t.is_array() && t.size() == 3, errc::parse_error,
            "pose needs rotation [w,x,y,z] and translation [x,y,z]");
    return Pose(Quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                     q[3].get<double>()),
                Vec3(t[0].get<double>(), t[1].get<double>(), t[2].get<double>()));
}

Image<std::uint8_t> decode_part_map(const GrayImage& raw) {
    Image<std::uint8_t> out(raw.width, raw.height, kBackgroundPart);
    for (size_t i = 0; i < raw.size(); ++i) {
        const std::uint8_t v = raw.pixels[i];
        if (v == 255)
            continue;
        require(v < PartId::kPartCount, errc::parse_error,
                "part map value " + std::to_string(v) + " out of range");
        out.pixels[i] = v;
    }
    return out;
}

std::vector<std::filesystem::path> sorted_obj_files(const std::filesystem::path& directory) {
    require(std::filesystem::is_directory(directory), errc::io_error,
            "not a directory: " + directory.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(directory))
        if (entry.is_regular_file() && entry.path().extension() == ".obj")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    return files;
}

} // namespace

PipelineConfig PipelineConfig::from_json_text(const std::string& text, const std::string& origin) {
    PipelineConfig config;
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(errc::parse_error, origin + ": " + e.what());
    }
    check_keys(root, "", {"pca", "noise", "fit", "render", "texture", "metrics", "demo", "seed"});

    if (root.contains("seed"))
        config.seed = root["seed"].get<std::uint64_t>();
    if (root.contains("pca")) {
        check_keys(root["pca"], "pca", {"r"});
        if (root["pca"].contains("r"))
            config.pca_r = root["pca"]["r"].get<int>();
    }
    if (root.contains("noise")) {
        const auto& n = root["noise"];
        check_keys(n, "noise", {"uv_sigma", "part_flip_rate", "dropout_rate", "pixel_sigma", "seed"});
        if (n.contains("uv_sigma"))
            config.noise.uv_sigma = n["uv_sigma"].get<double>();
        if (n.contains("part_flip_rate"))
            config.noise.part_flip_rate = n["part_flip_rate"].get<double>();
        if (n.contains("dropout_rate"))
            config.noise.dropout_rate = n["dropout_rate"].get<double>();
        if (n.contains("pixel_sigma"))
            config.noise.pixel_sigma = n["pixel_sigma"].get<double>();
        if (n.contains("seed"))
            config.noise.seed = n["seed"].get<std::uint64_t>();
        config.noise.validate();
    }
    if (root.contains("fit")) {
        const auto& f = root["fit"];
        check_keys(f, "fit",
                   {"lambda_c", "lambda_s", "lambda_r", "max_outer", "pose_iters", "shape_iters",
                    "huber_delta", "coeff_bound", "tol"});
        if (f.contains("lambda_c"))
            config.fit.lambda_c = f["lambda_c"].get<double>();
        if (f.contains("lambda_s"))
            config.fit.lambda_s = f["lambda_s"].get<double>();
        if (f.contains("lambda_r"))
            config.fit.lambda_r = f["lambda_r"].get<double>();
        if (f.contains("max_outer"))
            config.fit.max_outer = f["max_outer"].get<int>();
        if (f.contains("pose_iters"))
            config.fit.pose_iters = f["pose_iters"].get<int>();
        if (f.contains("shape_iters"))
            config.fit.shape_iters = f["shape_iters"].get<int>();
        if (f.contains("huber_delta"))
            config.fit.huber_delta = f["huber_delta"].get<double>();
        if (f.contains("coeff_bound"))
            config.fit.coeff_bound = f["coeff_bound"].get<double>();
        if (f.contains("tol"))
            config.fit.tol = f["tol"].get<double>();
        config.fit.validate();
    }
    if (root.contains("render")) {
        const auto& r = root["render"];
        check_keys(r, "render", {"width", "height", "fx", "fy", "cx", "cy"});
        CameraIntrinsics k = config.render;
        const int width = r.value("width", k.width);
        const int height = r.value("height", k.height);
        config.render = CameraIntrinsics(r.value("fx", k.fx), r.value("fy", k.fy),
                                         r.value("cx", k.cx), r.value("cy", k.cy), width, height);
    }
    if (root.contains("texture")) {
        const auto& t = root["texture"];
        check_keys(t, "texture",
                   {"resolution", "observed_weight", "symmetric_weight", "part_mean_weight"});
        if (t.contains("resolution"))
            config.texture_resolution = t["resolution"].get<int>();
        if (t.contains("observed_weight"))
            config.texture_weights.observed = t["observed_weight"].get<double>();
        if (t.contains("symmetric_weight"))
            config.texture_weights.symmetric = t["symmetric_weight"].get<double>();
        if (t.contains("part_mean_weight"))
            config.texture_weights.part_mean = t["part_mean_weight"].get<double>();
    }
    if (root.contains("metrics")) {
        const auto& m = root["metrics"];
        // trans grid is [2.8 : -0.3 : 0.1] per the published evaluation
        check_keys(m, "metrics",
                   {"voxel_pitch", "shape_thresholds", "trans_thresholds", "rot_thresholds"});
        if (m.contains("voxel_pitch"))
            config.metrics_voxel_pitch = m["voxel_pitch"].get<double>();
        if (m.contains("shape_thresholds"))
            config.thresholds.shape = m["shape_thresholds"].get<std::vector<double>>();
        if (m.contains("trans_thresholds"))
            config.thresholds.trans = m["trans_thresholds"].get<std::vector<double>>();
        if (m.contains("rot_thresholds"))
            config.thresholds.rot = m["rot_thresholds"].get<std::vector<double>>();
        config.thresholds.validate();
    }
    if (root.contains("demo")) {
        const auto& d = root["demo"];
        check_keys(d, "demo",
                   {"instances", "training_meshes", "correspondences", "depth_min", "depth_max"});
        if (d.contains("instances"))
            config.demo_instances = d["instances"].get<int>();
        if (d.contains("training_meshes"))
            config.demo_training_meshes = d["training_meshes"].get<int>();
        if (d.contains("correspondences"))
            config.demo_correspondences = d["correspondences"].get<int>();
        if (d.contains("depth_min"))
            config.demo_depth_min = d["depth_min"].get<double>();
        if (d.contains("depth_max"))
            config.demo_depth_max = d["depth_max"].get<double>();
    }
    return config;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), errc::io_error, "cannot open config: " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_text(text, path.string());
}

PipelineConfig CommonOptions::resolve() const {
    PipelineConfig config = config_path ? PipelineConfig::load(*config_path) : PipelineConfig{};
    if (seed)
        config.seed = *seed;
    return config;
}

int cmd_align(const std::filesystem::path& template_path, const std::filesystem::path& target_dir,
              const CommonOptions& options) {
    const Mesh template_mesh = load_mesh(template_path);
    const auto targets = sorted_obj_files(target_dir);
    if (targets.empty()) {
        std::cerr << "no targets in " << target_dir << "\n";
        return kExitData;
    }
    std::filesystem::create_directories(options.out_dir);
    bool any_failed = false;
    for (const auto& path : targets) {
        try {
            const Mesh target = load_mesh(path);
            const Mesh aligned = align_to_target(template_mesh, target);
            const PointGrid grid(target.vertices);
            double sum = 0.0;
            for (const Vec3& v : aligned.vertices)
                sum += (target.vertices[grid.nearest(v)] - v).squaredNorm();
            const double rms = std::sqrt(sum / static_cast<double>(aligned.vertex_count()));
            save_mesh(options.out_dir / path.filename(), aligned);
            std::cout << path.filename().string() << " rms=" << rms << "\n";
        } catch (const Error& e) {
            std::cerr << path.filename().string() << ": " << e.what() << "\n";
            any_failed = true;
        }
    }
    return any_failed ? kExitData : kExitOk;
}

int cmd_build_pca(const std::filesystem::path& mesh_dir, const std::filesystem::path& basis_path,
                  const CommonOptions& options) {
    const PipelineConfig config = options.resolve();
    const auto files = sorted_obj_files(mesh_dir);
    if (files.size() < 2) {
        std::cerr << "need at least 2 aligned meshes in " << mesh_dir << "\n";
        return kExitData;
    }
    std::vector<Mesh> meshes;
    meshes.reserve(files.size());
    for (const auto& path : files)
        meshes.push_back(load_mesh(path));
    const PcaBasis basis = build_pca(meshes, config.pca_r);
    if (basis_path.has_parent_path())
        std::filesystem::create_directories(basis_path.parent_path());
    save_basis(basis_path, basis);
    std::cout << "basis r=" << basis.rank() << " vertices=" << basis.vertex_count() << " -> "
              << basis_path << "\n";
    return kExitOk;
}

int cmd_render(const std::filesystem::path& scene_path, const CommonOptions& options) {
    const PipelineConfig config = options.resolve();
    std::ifstream in(scene_path);
    require(in.good(), errc::io_error, "cannot open scene: " + scene_path.string());
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(errc::parse_error, scene_path.string() + ": " + e.what());
    }
    check_keys(root, "", {"basis", "instances"});
    std::optional<PcaBasis> basis;
    if (root.contains("basis"))
        basis = load_basis(root["basis"].get<std::string>());

    Scene scene(config.render);
    require(root.contains("instances") && root["instances"].is_array(), errc::parse_error,
            "scene needs an 'instances' array");
    for (const auto& inst : root["instances"]) {
        check_keys(inst, "instance", {"mesh", "coeffs", "pose", "id"});
        const Pose pose = pose_from_json(inst.at("pose"));
        const int id = inst.at("id").get<int>();
        if (inst.contains("mesh")) {
            scene.add_instance(load_mesh(inst["mesh"].get<std::string>()), pose, id);
        } else {
            require(basis.has_value(), errc::parse_error,
                    "instance with coeffs needs a 'basis' entry");
            const auto values = inst.at("coeffs").get<std::vector<double>>();
            ShapeCoefficients coeffs =
                Eigen::Map<const Eigen::VectorXd>(values.data(), values.size());
            scene.add_instance(*basis, coeffs, pose, id);
        }
    }
    const LabelMaps maps = rasterize(scene);
    write_label_maps(options.out_dir, "scene", maps);
    std::cout << "label maps -> " << options.out_dir << "\n";
    return kExitOk;
}

int cmd_fit(const std::filesystem::path& basis_path, const std::filesystem::path& corrs_path,
            const std::filesystem::path& part_map_path, const CommonOptions& options) {
    const PipelineConfig config = options.resolve();
    const PcaBasis basis = load_basis(basis_path);
    const auto correspondences = load_correspondences_csv(corrs_path);
    const Image<std::uint8_t> part_map = decode_part_map(read_pgm(part_map_path));
    require(part_map.width == config.render.width && part_map.height == config.render.height,
            errc::dimension_mismatch, "part map size disagrees with configured intrinsics");

    VehicleTypePrior prior;
    prior.mean_coeffs = ShapeCoefficients::Zero(basis.rank());
    const auto [lo, hi] = basis.topology.bounding_box();
    prior.dims = Vec3((hi - lo).y(), (hi - lo).z(), (hi - lo).x());

    const FitResult result =
        fit(correspondences, part_map, basis, prior, config.render, config.fit);

    std::filesystem::create_directories(options.out_dir);
    json report;
    report["pose"] = pose_to_json(result.pose);
    report["coeffs"] = std::vector<double>(result.coeffs.data(),
                                           result.coeffs.data() + result.coeffs.size());
    json trace = json::array();
    for (const EnergyBreakdown& e : result.energy_trace)
        trace.push_back({{"data", e.data},
                         {"silhouette", e.silhouette},
                         {"smoothness", e.smoothness},
                         {"total", e.total}});
    report["energy_trace"] = trace;
    report["inlier_count"] = result.inlier_count;
    report["converged"] = result.converged;
    report["dims_within_prior"] = result.dims_within_prior;
    std::ofstream out(options.out_dir / "fit.json");
    out << report.dump(2) << "\n";
    save_mesh(options.out_dir / "fitted.obj", result.mesh);
    std::cout << "fit " << (result.converged ? "converged" : "stopped") << ", inliers "
              << result.inlier_count << " -> " << options.out_dir << "\n";
    return result.converged ? kExitOk : kExitData;
}

int cmd_texture(const std::filesystem::path& mesh_path, const std::filesystem::path& image_path,
                const std::filesystem::path& pose_path, const CommonOptions& options) {
    const PipelineConfig config = options.resolve();
    const Mesh mesh = load_mesh(mesh_path);
    const RgbImage image = read_ppm(image_path);
    std::ifstream in(pose_path);
    require(in.good(), errc::io_error, "cannot open pose: " + pose_path.string());
    json pose_json;
    try {
        pose_json = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(errc::parse_error, pose_path.string() + ": " + e.what());
    }
    const Pose pose = pose_from_json(pose_json);

    const CameraIntrinsics k(config.render.fx, config.render.fy, config.render.cx, config.render.cy,
                             image.width, image.height);
    const TextureAtlas partial =
        extract_visible(image, mesh, pose, k, config.texture_resolution);

    const RgbImage prior_texture = make_prior_texture(config.texture_resolution);
    TextureAtlas prior_colors = make_empty_atlas(mesh, config.texture_resolution);
    prior_colors.image = prior_texture;
    const PriorGradientField gradients = finite_difference_gradients(prior_texture);
    const std::vector<SymmetryPlane> planes{SymmetryPlane(Vec3::UnitY(), 0.0)};
    const TextureAtlas completed =
        complete_texture(partial, mesh, planes, gradients, prior_colors, config.texture_weights);

    save_atlas(options.out_dir, "atlas_partial", partial);
    save_atlas(options.out_dir, "atlas", completed);
    std::cout << "texture atlases -> " << options.out_dir << "\n";
    return kExitOk;
}

namespace {

struct EvalRecord {
    Pose pose;
    Mesh mesh;
    double score = 1.0;
    int frame = 0;
    std::optional<GrayImage> mask;
};

std::vector<EvalRecord> load_records(const std::filesystem::path& path, bool with_scores) {
    std::ifstream in(path);
    require(in.good(), errc::io_error, "cannot open records: " + path.string());
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(errc::parse_error, path.string() + ": " + e.what());
    }
    check_keys(root, "", {"records"});
    require(root.contains("records") && root["records"].is_array(), errc::parse_error,
            path.string() + ": needs a 'records' array");
    std::map<std::string, Mesh> cache;
    std::vector<EvalRecord> records;
    for (const auto& r : root["records"]) {
        check_keys(r, "record", {"pose", "mesh", "score", "frame", "mask"});
        EvalRecord record;
        record.pose = pose_from_json(r.at("pose"));
        const auto mesh_path = r.at("mesh").get<std::string>();
        auto it = cache.find(mesh_path);
        if (it == cache.end())
            it = cache.emplace(mesh_path, load_mesh(mesh_path)).first;
        record.mesh = it->second;
        if (with_scores)
            record.score = r.value("score", 1.0);
        record.frame = r.value("frame", 0);
        if (r.contains("mask"))
            record.mask = read_pgm(r["mask"].get<std::string>());
        records.push_back(std::move(record));
    }
    return records;
}

} // namespace

int cmd_eval(const std::filesystem::path& detections_path,
             const std::filesystem::path& ground_truth_path, const CommonOptions& options) {
    const PipelineConfig config = options.resolve();
    const auto det_records = load_records(detections_path, true);
    const auto gt_records = load_records(ground_truth_path, false);

    std::vector<Detection3d> detections;
    std::vector<GroundTruth3d> ground_truth;
    for (const auto& r : det_records)
        detections.push_back({r.pose, r.mesh, r.score, r.frame});
    for (const auto& r : gt_records)
        ground_truth.push_back({r.pose, r.mesh, r.frame});

    const A3dpResult abs_result =
        a3dp(detections, ground_truth, config.thresholds, A3dpMode::abs, config.metrics_voxel_pitch);
    const A3dpResult rel_result =
        a3dp(detections, ground_truth, config.thresholds, A3dpMode::rel, config.metrics_voxel_pitch);

    std::filesystem::create_directories(options.out_dir);
    write_a3dp_csv(options.out_dir / "a3dp_abs.csv", abs_result, config.thresholds);
    write_a3dp_csv(options.out_dir / "a3dp_rel.csv", rel_result, config.thresholds);

    json summary;
    summary["a3dp_abs"] = {{"mean", abs_result.mean}, {"c_l", abs_result.c_l}, {"c_s", abs_result.c_s}};
    summary["a3dp_rel"] = {{"mean", rel_result.mean}, {"c_l", rel_result.c_l}, {"c_s", rel_result.c_s}};

    // mask mAP when every record carries a mask
    const bool all_masks =
        std::all_of(det_records.begin(), det_records.end(),
                    [](const EvalRecord& r) { return r.mask.has_value(); }) &&
        std::all_of(gt_records.begin(), gt_records.end(),
                    [](const EvalRecord& r) { return r.mask.has_value(); });
    if (all_masks && !det_records.empty() && !gt_records.empty()) {
        int max_frame = 0;
        for (const auto& r : det_records)
            max_frame = std::max(max_frame, r.frame);
        for (const auto& r : gt_records)
            max_frame = std::max(max_frame, r.frame);
        std::vector<std::vector<MaskDetection>> predictions(max_frame + 1);
        std::vector<std::vector<GrayImage>> gt_masks(max_frame + 1);
        for (const auto& r : det_records)
            predictions[r.frame].push_back({*r.mask, r.score});
        for (const auto& r : gt_records)
            gt_masks[r.frame].push_back(*r.mask);
        const MaskMapResult m = mask_map(predictions, gt_masks);
        summary["mask_map"] = {{"map", m.map}, {"ap50", m.ap50}, {"ap75", m.ap75}};
    }

    std::ofstream out(options.out_dir / "summary.json");
    out << summary.dump(2) << "\n";
    std::cout << "A3DP-Abs mean " << abs_result.mean << " (c-l " << abs_result.c_l << ", c-s "
              << abs_result.c_s << ") -> " << options.out_dir << "\n";
    return kExitOk;
}

int cmd_demo(const CommonOptions& options) {
    const PipelineConfig config = options.resolve();
    std::string stage = "setup";
    try {
        std::filesystem::create_directories(options.out_dir);
        Rng rng(config.seed);

        stage = "pca";
        const auto family = make_vehicle_family(config.demo_training_meshes, config.seed, 1);
        const PcaBasis basis = build_pca(family, config.pca_r);
        save_basis(options.out_dir / "basis.bin", basis);

        stage = "scene";
        const int k_instances = config.demo_instances;
        require(k_instances >= 1, errc::invalid_argument, "demo needs at least one instance");
        // base rotation: model (x fwd, y left, z up) -> camera (x right, y down, z fwd)
        Mat3 base;
        base << 0, -1, 0, 0, 0, -1, 1, 0, 0;
        const Quat base_q(base);

        Scene scene(config.render);
        std::vector<Pose> gt_poses;
        std::vector<ShapeCoefficients> gt_coeffs;
        std::vector<RgbImage> gt_textures;
        std::vector<size_t> solo_fg;
        const auto visible_count = [&](const LabelMaps& maps, int id) {
            size_t count = 0;
            for (const std::int32_t v : maps.instance_map.pixels)
                count += v == id;
            return count;
        };
        for (int i = 0; i < k_instances; ++i) {
            ShapeCoefficients s(basis.rank());
            for (int c = 0; c < basis.rank(); ++c)
                s[c] = rng.uniform(-1.2, 1.2);
            const double depth = config.demo_depth_min +
                                 (config.demo_depth_max - config.demo_depth_min) *
                                     (k_instances == 1 ? 0.5
                                                       : static_cast<double>(i) / (k_instances - 1));
            // keep sampling placements until no instance is mostly buried
            bool placed = false;
            for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
                const double lateral = rng.uniform(-1.8, 1.8);
                const double yaw = rng.uniform(-M_PI, M_PI);
                const Quat q = (base_q * Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()))).normalized();
                const Pose pose(q, Vec3(lateral, 1.4, depth));

                Scene candidate = scene;
                candidate.add_instance(basis, s, pose, i);
                const LabelMaps maps = rasterize(candidate);
                Scene solo(config.render);
                solo.add_instance(basis, s, pose, i);
                const size_t own_solo = visible_count(rasterize(solo), i);
                bool ok = own_solo > 500 && visible_count(maps, i) * 10 >= own_solo * 4;
                for (int j = 0; j < i && ok; ++j)
                    ok = visible_count(maps, j) * 10 >= solo_fg[j] * 4;
                if (!ok)
                    continue;
                scene = std::move(candidate);
                gt_poses.push_back(pose);
                solo_fg.push_back(own_solo);
                placed = true;
            }
            require(placed, errc::degenerate_configuration,
                    "could not place instance " + std::to_string(i) + " with enough visibility");
            gt_coeffs.push_back(s);
            gt_textures.push_back(make_prior_texture(
                config.texture_resolution, static_cast<double>(i) / std::max(1, k_instances)));
        }

        stage = "render";
        const LabelMaps maps = rasterize(scene);
        write_label_maps(options.out_dir / "maps", "scene", maps);
        const RgbImage image = render_color(scene, gt_textures, Rgb(0.9, 0.92, 0.95));
        write_ppm(options.out_dir / "image.ppm", image);
        write_png(options.out_dir / "image.png", image);

        stage = "correspondences";
        std::vector<std::vector<Correspondence>> corrs(k_instances);
        std::vector<Image<std::uint8_t>> part_maps(
            k_instances, Image<std::uint8_t>(config.render.width, config.render.height,
                                             kBackgroundPart));
        for (int i = 0; i < k_instances; ++i) {
            NoiseModel noise = config.noise;
            noise.seed = config.seed * 7919 + i;
            corrs[i] = sample_correspondences(maps, i, config.demo_correspondences, noise);
            save_correspondences_csv(options.out_dir / ("corrs_" + std::to_string(i) + ".csv"),
                                     corrs[i]);
            for (int y = 0; y < config.render.height; ++y)
                for (int x = 0; x < config.render.width; ++x)
                    if (maps.instance_map.at(x, y) == i)
                        part_maps[i].at(x, y) = maps.part_map.at(x, y);
        }

        stage = "fitting";
        VehicleTypePrior prior;
        prior.type_id = VehicleType::notchback;
        prior.mean_coeffs = ShapeCoefficients::Zero(basis.rank());
        {
            const auto [lo, hi] = basis.topology.bounding_box();
            prior.dims = Vec3((hi - lo).y(), (hi - lo).z(), (hi - lo).x());
        }
        std::vector<FitResult> fits(k_instances);
        std::vector<std::exception_ptr> errors(k_instances);
        const int jobs = std::max(1, options.jobs);
        std::vector<std::thread> workers;
        std::atomic<int> next{0};
        for (int w = 0; w < jobs; ++w)
            workers.emplace_back([&]() {
                for (int i = next.fetch_add(1); i < k_instances; i = next.fetch_add(1)) {
                    try {
                        fits[i] = fit(corrs[i], part_maps[i], basis, prior, config.render,
                                      config.fit);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        for (auto& worker : workers)
            worker.join();
        for (int i = 0; i < k_instances; ++i)
            if (errors[i])
                std::rethrow_exception(errors[i]);

        stage = "texture";
        const std::vector<SymmetryPlane> planes{SymmetryPlane(Vec3::UnitY(), 0.0)};
        const RgbImage template_texture = make_prior_texture(config.texture_resolution);
        const PriorGradientField gradients = finite_difference_gradients(template_texture);
        for (int i = 0; i < k_instances; ++i) {
            const TextureAtlas partial = extract_visible(image, fits[i].mesh, fits[i].pose,
                                                         config.render, config.texture_resolution);
            TextureAtlas prior_colors = make_empty_atlas(fits[i].mesh, config.texture_resolution);
            prior_colors.image = template_texture;
            const TextureAtlas completed = complete_texture(partial, fits[i].mesh, planes,
                                                            gradients, prior_colors,
                                                            config.texture_weights);
            save_atlas(options.out_dir, "atlas_" + std::to_string(i), completed);
            save_mesh(options.out_dir / ("fitted_" + std::to_string(i) + ".obj"), fits[i].mesh);
        }

        stage = "overlay";
        {
            Scene fitted_scene(config.render);
            std::vector<RgbImage> fitted_textures;
            for (int i = 0; i < k_instances; ++i) {
                fitted_scene.add_instance(fits[i].mesh, fits[i].pose, i);
                fitted_textures.push_back(gt_textures[i]);
            }
            const RgbImage overlay = blend_overlay(image, fitted_scene, fitted_textures, 0.6);
            write_ppm(options.out_dir / "overlay.ppm", overlay);
            write_png(options.out_dir / "overlay.png", overlay);
        }

        stage = "metrics";
        std::vector<Detection3d> detections;
        std::vector<GroundTruth3d> ground_truth;
        std::vector<std::vector<MaskDetection>> pred_masks(1);
        std::vector<std::vector<GrayImage>> gt_masks(1);
        json dims_report = json::array();
        Vec3 mean_rate = Vec3::Zero();
        for (int i = 0; i < k_instances; ++i) {
            detections.push_back({fits[i].pose, fits[i].mesh, 1.0, 0});
            ground_truth.push_back({gt_poses[i], synthesize(basis, gt_coeffs[i]), 0});

            GrayImage gt_mask(config.render.width, config.render.height, 0);
            for (size_t p = 0; p < maps.instance_map.size(); ++p)
                if (maps.instance_map.pixels[p] == i)
                    gt_mask.pixels[p] = 255;
            gt_masks[0].push_back(gt_mask);
            Scene single(config.render);
            single.add_instance(fits[i].mesh, fits[i].pose, 0);
            const LabelMaps fitted_maps = rasterize(single);
            GrayImage pred_mask(config.render.width, config.render.height, 0);
            for (size_t p = 0; p < fitted_maps.instance_map.size(); ++p)
                if (fitted_maps.instance_map.pixels[p] == 0)
                    pred_mask.pixels[p] = 255;
            pred_masks[0].push_back({pred_mask, 1.0});
            write_pgm(options.out_dir / ("mask_gt_" + std::to_string(i) + ".pgm"), gt_mask);
            write_pgm(options.out_dir / ("mask_pred_" + std::to_string(i) + ".pgm"), pred_mask);

            const DimensionError dims = shape_dim_error(fits[i].mesh, ground_truth.back().mesh);
            mean_rate += dims.rate / k_instances;
            dims_report.push_back({{"instance", i},
                                   {"error", {dims.error.x(), dims.error.y(), dims.error.z()}},
                                   {"rate", {dims.rate.x(), dims.rate.y(), dims.rate.z()}}});
        }
        const A3dpResult abs_result = a3dp(detections, ground_truth, config.thresholds,
                                           A3dpMode::abs, config.metrics_voxel_pitch);
        const MaskMapResult mask_result = mask_map(pred_masks, gt_masks);
        write_a3dp_csv(options.out_dir / "a3dp_abs.csv", abs_result, config.thresholds);

        json report;
        report["a3dp_abs"] = {{"mean", abs_result.mean},
                              {"c_l", abs_result.c_l},
                              {"c_s", abs_result.c_s}};
        report["mask_map"] = {{"map", mask_result.map},
                              {"ap50", mask_result.ap50},
                              {"ap75", mask_result.ap75}};
        report["dims"] = dims_report;
        report["mean_dim_rate"] = {mean_rate.x(), mean_rate.y(), mean_rate.z()};
        json fit_report = json::array();
        bool all_converged = true;
        for (int i = 0; i < k_instances; ++i) {
            all_converged = all_converged && fits[i].converged;
            const PoseDistance pd =
                pose_distance(fits[i].pose, fits[i].mesh, gt_poses[i], ground_truth[i].mesh,
                              config.metrics_voxel_pitch);
            fit_report.push_back({{"instance", i},
                                  {"converged", fits[i].converged},
                                  {"inliers", fits[i].inlier_count},
                                  {"final_energy", fits[i].energy_trace.back().total},
                                  {"pose", pose_to_json(fits[i].pose)},
                                  {"trans_error", pd.trans_abs},
                                  {"rot_error_deg", pd.rot * 180.0 / M_PI},
                                  {"shape_sim", pd.shape_sim}});
        }
        report["fits"] = fit_report;
        report["seed"] = config.seed;
        std::ofstream out(options.out_dir / "report.json");
        out << report.dump(2) << "\n";

        std::cout << "demo: " << k_instances << " instances, A3DP-Abs mean " << abs_result.mean
                  << " c-l " << abs_result.c_l << ", mask mAP " << mask_result.map << " -> "
                  << options.out_dir << "\n";
        if (!all_converged) {
            std::cerr << "demo: not every fit converged\n";
            return kExitData;
        }
        if (abs_result.c_l != 1.0) {
            std::cerr << "demo: A3DP c-l " << abs_result.c_l << " != 1.0\n";
            return kExitData;
        }
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << "demo stage '" << stage << "': " << e.what() << "\n";
        return kExitData;
    }
}

} // namespace carfit::cli
