#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace carfit::cli;

int main(int argc, char** argv) {
    CLI::App app{"vehicle pose/shape/texture reconstruction toolkit"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags are valid after the subcommand too

    CommonOptions options;
    std::string config_path, out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    app.add_option("--config", config_path, "pipeline config JSON")->configurable(false);
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--jobs", options.jobs, "parallel instance workers")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "random seed override")->each([&](const std::string&) {
        seed_set = true;
    });

    std::string template_path, target_dir, mesh_dir, basis_path, scene_path, corrs_path,
        part_map_path, mesh_path, image_path, pose_path, detections_path, gt_path;

    auto* align = app.add_subcommand("align", "deform the template onto every target mesh");
    align->add_option("template", template_path, "part-labeled template OBJ")->required();
    align->add_option("targets", target_dir, "directory of target OBJ files")->required();

    auto* build = app.add_subcommand("build-pca", "build a shape basis from aligned meshes");
    build->add_option("meshes", mesh_dir, "directory of topology-aligned OBJ files")->required();
    build->add_option("basis", basis_path, "output basis file")->required();

    auto* render = app.add_subcommand("render", "rasterize a scene into label maps");
    render->add_option("scene", scene_path, "scene JSON")->required();

    auto* fit = app.add_subcommand("fit", "estimate pose and shape from correspondences");
    fit->add_option("basis", basis_path, "shape basis file")->required();
    fit->add_option("correspondences", corrs_path, "correspondence CSV")->required();
    fit->add_option("partmap", part_map_path, "predicted part map PGM")->required();

    auto* texture = app.add_subcommand("texture", "extract and complete an appearance atlas");
    texture->add_option("mesh", mesh_path, "fitted mesh OBJ")->required();
    texture->add_option("image", image_path, "input image PPM")->required();
    texture->add_option("pose", pose_path, "pose JSON")->required();

    auto* eval = app.add_subcommand("eval", "score detections against ground truth");
    eval->add_option("detections", detections_path, "detection records JSON")->required();
    eval->add_option("groundtruth", gt_path, "ground-truth records JSON")->required();

    auto* demo = app.add_subcommand("demo", "end-to-end synthetic pipeline run");
    (void)demo;

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (!config_path.empty())
        options.config_path = config_path;
    if (seed_set)
        options.seed = seed;
    options.out_dir = out_dir;

    try {
        if (align->parsed())
            return cmd_align(template_path, target_dir, options);
        if (build->parsed())
            return cmd_build_pca(mesh_dir, basis_path, options);
        if (render->parsed())
            return cmd_render(scene_path, options);
        if (fit->parsed())
            return cmd_fit(basis_path, corrs_path, part_map_path, options);
        if (texture->parsed())
            return cmd_texture(mesh_path, image_path, pose_path, options);
        if (eval->parsed())
            return cmd_eval(detections_path, gt_path, options);
        if (demo->parsed())
            return cmd_demo(options);
    } catch (const carfit::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
