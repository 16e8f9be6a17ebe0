// geomvd: normal integration, proxy-surface meshing, multi-view geometry
// image rendering, attention-strength schedules and a toy multi-view
// diffusion demo, behind one deterministic CLI.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "geomvd/errors.hpp"
#include "geomvd/image_io.hpp"
#include "geomvd/integrate.hpp"
#include "geomvd/pipeline.hpp"
#include "geomvd/render.hpp"
#include "geomvd/schedule.hpp"
#include "geomvd/surface.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitSolver = 3;
constexpr int kExitIo = 4;

struct JsonLogger {
    bool enabled = false;

    void stage(const std::string& name, json fields = json::object()) const {
        if (!enabled) return;
        fields["stage"] = name;
        std::cout << fields.dump() << "\n";
    }
};

std::vector<double> parse_azimuths(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stod(tok));
    }
    if (out.empty()) throw geomvd::ValidationError("azimuth list is empty");
    return out;
}

void parse_background(const std::string& spec, double (&bg)[3]) {
    if (spec == "white") {
        bg[0] = bg[1] = bg[2] = 1.0;
    } else if (spec == "black") {
        bg[0] = bg[1] = bg[2] = 0.0;
    } else if (spec == "gray" || spec == "grey") {
        bg[0] = bg[1] = bg[2] = 0.5;
    } else {
        const std::vector<double> v = parse_azimuths(spec);
        if (v.size() != 3) throw geomvd::ValidationError("background must be a name or r,g,b");
        for (int i = 0; i < 3; ++i) bg[i] = v[i];
    }
}

std::string azimuth_label(double az) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", az);
    return buf;
}

void require_inputs(std::initializer_list<std::string> paths) {
    for (const std::string& p : paths)
        if (!p.empty() && !fs::exists(p)) throw geomvd::IoError("input file not found: " + p);
}

// Applies a JSON config file as defaults: every key must name a known long
// option of the subcommand; values already given on the command line win.
void apply_config(CLI::App* cmd, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw geomvd::IoError("cannot open config file: " + path);
    json cfg;
    try {
        in >> cfg;
    } catch (const json::parse_error& e) {
        throw geomvd::ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!cfg.is_object()) throw geomvd::ValidationError("config root must be a JSON object");

    for (const auto& [key, value] : cfg.items()) {
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (opt == nullptr) throw geomvd::ValidationError("unknown config key: " + key);
        if (opt->count() > 0) continue; // command line overrides file
        if (value.is_boolean()) {
            if (value.get<bool>()) opt->add_result("true");
        } else if (value.is_string()) {
            opt->add_result(value.get<std::string>());
        } else {
            opt->add_result(value.dump());
        }
        opt->run_callback();
    }
}

// ---- subcommand parameter records -----------------------------------------

struct IntegrateArgs {
    std::string normals, mask, depth, out, config;
    geomvd::IntegrationConfig cfg;
};

struct MeshArgs {
    std::string depth, mask, out, config;
    double pixel_size = 1.0;
};

struct RenderArgs {
    std::string mesh, out_dir, config;
    std::string azimuths = "30,90,150,210,270,330";
    std::string bg = "white";
    double elevation = 0.0;
    int size = 320;
    double ortho_half_h = 0.0;
    bool perspective = false;
    double fov = 50.0;
    bool world_space = false;
};

struct ScheduleArgs {
    std::string out, config;
    int T = 1000;
    double lambda_max = 0.3;
    double lambda_min = 1e-5;
    bool no_clamp = false;
};

struct DemoArgs {
    std::string image, text, normals, mask, out_dir, config;
    uint64_t seed = 0;
    int T = 50;
    int latent_size = 40;
    int geo_size = 320;
    double input_azimuth = 10.0;
    double input_elevation = 10.0;
    double lambda_max = 0.3;
    double lambda_min = 1e-5;
    double stiffness_k = 2.0;
    int iters = 100;
};

int run_integrate(const IntegrateArgs& a, const JsonLogger& log) {
    require_inputs({a.normals, a.mask, a.depth});
    const geomvd::NormalMap n = geomvd::load_pfm_normals(a.normals);
    const geomvd::ForegroundMask mask = geomvd::load_mask(a.mask);

    std::optional<geomvd::DepthMap> warm;
    if (!a.depth.empty()) warm = geomvd::load_pfm_depth(a.depth);

    const geomvd::IntegrationResult res =
        geomvd::integrate_normals_detailed(n, mask, a.cfg, warm ? &*warm : nullptr);
    geomvd::save_pfm_depth(res.depth, a.out);

    log.stage("integrate", {{"out", a.out},
                            {"outer_iterations", res.outer_iterations},
                            {"cg_iterations", res.total_cg_iterations},
                            {"final_energy", res.energy_history.back()}});
    return kExitOk;
}

int run_mesh(const MeshArgs& a, const JsonLogger& log) {
    require_inputs({a.depth, a.mask});
    const geomvd::DepthMap z = geomvd::load_pfm_depth(a.depth);
    const geomvd::ForegroundMask mask = geomvd::load_mask(a.mask);
    const geomvd::TriangleMesh mesh = geomvd::heightfield_to_mesh(z, mask, a.pixel_size);
    geomvd::save_obj(mesh, a.out);

    log.stage("mesh", {{"out", a.out},
                       {"vertices", mesh.vertices.size()},
                       {"triangles", mesh.triangles.size()}});
    return kExitOk;
}

int run_render(const RenderArgs& a, const JsonLogger& log) {
    require_inputs({a.mesh});
    const geomvd::TriangleMesh mesh = geomvd::load_obj(a.mesh);
    const std::vector<double> azimuths = parse_azimuths(a.azimuths);

    geomvd::RenderConfig cfg;
    cfg.width = cfg.height = a.size;
    cfg.ortho_half_height = a.ortho_half_h;
    cfg.color_space = a.world_space ? geomvd::ColorSpace::world : geomvd::ColorSpace::camera;
    parse_background(a.bg, cfg.background);

    fs::create_directories(a.out_dir);
    std::vector<geomvd::CameraPose> poses = geomvd::orbit_poses(mesh, azimuths, a.elevation);
    for (size_t i = 0; i < poses.size(); ++i) {
        if (a.perspective) {
            poses[i].projection = geomvd::CameraPose::Projection::perspective;
            poses[i].fov_deg = a.fov;
        }
        const geomvd::RgbImage img = geomvd::render_geometry_image(mesh, poses[i], cfg);
        const fs::path out = fs::path(a.out_dir) / ("view_" + azimuth_label(azimuths[i]) + ".png");
        geomvd::save_png(img, out.string());
        log.stage("render", {{"out", out.string()}, {"azimuth", azimuths[i]}});
    }
    return kExitOk;
}

int run_schedule(const ScheduleArgs& a, const JsonLogger& log) {
    geomvd::ScheduleParams p;
    p.total_steps_T = a.T;
    p.lambda_max = a.lambda_max;
    p.lambda_min = a.lambda_min;
    p.clamp_negative_cos = !a.no_clamp;
    geomvd::dump_schedule(p, a.out);

    log.stage("schedule", {{"out", a.out}, {"rows", a.T + 1}});
    return kExitOk;
}

int run_demo(const DemoArgs& a, const JsonLogger& log) {
    require_inputs({a.image, a.normals, a.mask});
    const geomvd::RgbImage input = geomvd::load_png_rgb(a.image);
    const geomvd::NormalMap normals = geomvd::load_pfm_normals(a.normals);
    const geomvd::ForegroundMask mask = geomvd::load_mask(a.mask);
    fs::create_directories(a.out_dir);

    geomvd::IntegrationConfig icfg;
    icfg.stiffness_k = a.stiffness_k;
    icfg.max_outer_iters = a.iters;
    const geomvd::IntegrationResult integ = geomvd::integrate_normals_detailed(normals, mask, icfg);
    log.stage("integrate", {{"outer_iterations", integ.outer_iterations},
                            {"final_energy", integ.energy_history.back()}});

    const geomvd::TriangleMesh mesh = geomvd::heightfield_to_mesh(integ.depth, mask);
    log.stage("mesh", {{"vertices", mesh.vertices.size()}, {"triangles", mesh.triangles.size()}});

    const std::vector<double>& azimuths = geomvd::default_azimuths();
    std::vector<geomvd::CameraPose> poses = geomvd::orbit_poses(mesh, azimuths, 0.0);

    geomvd::RenderConfig rcfg;
    rcfg.width = rcfg.height = a.geo_size;
    std::vector<geomvd::RgbImage> geo_images;
    for (size_t i = 0; i < poses.size(); ++i) {
        geo_images.push_back(geomvd::render_geometry_image(mesh, poses[i], rcfg));
        const fs::path out = fs::path(a.out_dir) / ("view_" + azimuth_label(azimuths[i]) + ".png");
        geomvd::save_png(geo_images.back(), out.string());
        log.stage("render", {{"out", out.string()}, {"azimuth", azimuths[i]}});
    }

    geomvd::SamplerConfig scfg;
    scfg.T = a.T;
    scfg.seed = a.seed;
    scfg.latent_size = a.latent_size;
    scfg.lambda_max = a.lambda_max;
    scfg.lambda_min = a.lambda_min;

    const fs::path csv = fs::path(a.out_dir) / "schedule.csv";
    geomvd::dump_schedule(scfg.schedule_params(), csv.string());
    log.stage("schedule", {{"out", csv.string()}});

    geomvd::CameraPose input_pose = poses.front();
    input_pose.azimuth_deg = a.input_azimuth;
    input_pose.elevation_deg = a.input_elevation;

    const geomvd::MultiviewSample sample =
        geomvd::sample_multiview(input, a.text, geo_images, poses, input_pose, scfg);
    for (size_t i = 0; i < sample.images.size(); ++i) {
        const fs::path out = fs::path(a.out_dir) / ("sampled_" + azimuth_label(azimuths[i]) + ".png");
        geomvd::save_png(sample.images[i], out.string());
    }
    log.stage("sample", {{"views", sample.images.size()}, {"T", a.T}, {"seed", a.seed}});
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Geometry-guided multi-view toolkit"};
    app.require_subcommand(1);

    JsonLogger log;
    app.add_flag("--json-log", log.enabled, "Emit one JSON object per completed stage on stdout");

    IntegrateArgs ia;
    CLI::App* integrate = app.add_subcommand("integrate", "Recover depth from a normal map");
    integrate->add_option("--normals", ia.normals, "Input normal map (3-channel PFM)")->required();
    integrate->add_option("--mask", ia.mask, "Foreground mask (PNG)")->required();
    integrate->add_option("--depth", ia.depth, "Optional warm-start depth (1-channel PFM)");
    integrate->add_option("--out", ia.out, "Output depth PFM")->required();
    integrate->add_option("--k", ia.cfg.stiffness_k, "Bilateral sigmoid sharpness");
    integrate->add_option("--iters", ia.cfg.max_outer_iters, "Max IRLS outer iterations");
    integrate->add_option("--outer-tol", ia.cfg.outer_tol, "Relative energy change tolerance");
    integrate->add_option("--cg-tol", ia.cfg.cg_tol, "CG relative residual tolerance");
    integrate->add_option("--cg-iters", ia.cfg.cg_max_iters, "Max CG iterations per solve");
    integrate->add_option("--nz-floor", ia.cfg.nz_floor, "Denominator floor for nz");
    integrate->add_option("--config", ia.config, "JSON config file (CLI flags override)");

    MeshArgs ma;
    CLI::App* mesh = app.add_subcommand("mesh", "Triangulate a depth map into the proxy surface");
    mesh->add_option("--depth", ma.depth, "Input depth PFM")->required();
    mesh->add_option("--mask", ma.mask, "Foreground mask (PNG)")->required();
    mesh->add_option("--out", ma.out, "Output OBJ")->required();
    mesh->add_option("--pixel-size", ma.pixel_size, "Scene units per pixel");
    mesh->add_option("--config", ma.config, "JSON config file (CLI flags override)");

    RenderArgs ra;
    CLI::App* render = app.add_subcommand("render", "Render normal-colored geometry images");
    render->add_option("--mesh", ra.mesh, "Input OBJ mesh")->required();
    render->add_option("--azimuths", ra.azimuths, "Comma-separated azimuths in degrees");
    render->add_option("--elevation", ra.elevation, "Elevation in degrees");
    render->add_option("--size", ra.size, "Image width and height");
    render->add_option("--bg", ra.bg, "Background: white|black|gray or r,g,b");
    render->add_option("--out-dir", ra.out_dir, "Output directory (view_{azimuth}.png)")->required();
    render->add_option("--ortho-half-h", ra.ortho_half_h, "Orthographic half height (0 = auto)");
    render->add_flag("--perspective", ra.perspective, "Use perspective projection");
    render->add_option("--fov", ra.fov, "Perspective field of view in degrees");
    render->add_flag("--world-space", ra.world_space, "Color by world-space normals");
    render->add_option("--config", ra.config, "JSON config file (CLI flags override)");

    ScheduleArgs sa;
    CLI::App* schedule = app.add_subcommand("schedule", "Dump the attention strength schedule");
    schedule->add_option("--T", sa.T, "Total diffusion steps (even)");
    schedule->add_option("--lambda-max", sa.lambda_max, "Strength at t = T");
    schedule->add_option("--lambda-min", sa.lambda_min, "Strength at t = T/2");
    schedule->add_flag("--no-clamp", sa.no_clamp, "Allow negative cosine mask scales");
    schedule->add_option("--out", sa.out, "Output CSV")->required();
    schedule->add_option("--config", sa.config, "JSON config file (CLI flags override)");

    DemoArgs da;
    CLI::App* demo = app.add_subcommand(
        "demo", "Integrate, mesh, render geometry images and run the toy multi-view sampler");
    demo->add_option("--image", da.image, "Input image (PNG, dims divisible by 8)")->required();
    demo->add_option("--text", da.text, "Optional text prompt");
    demo->add_option("--normals", da.normals, "Input normal map (PFM)")->required();
    demo->add_option("--mask", da.mask, "Foreground mask (PNG)")->required();
    demo->add_option("--out-dir", da.out_dir, "Output directory")->required();
    demo->add_option("--seed", da.seed, "Run seed");
    demo->add_option("--T", da.T, "Diffusion steps (even)");
    demo->add_option("--latent-size", da.latent_size, "Latent image size (multiple of 8)");
    demo->add_option("--geo-size", da.geo_size, "Geometry image size");
    demo->add_option("--input-azimuth", da.input_azimuth, "Input view azimuth in degrees");
    demo->add_option("--input-elevation", da.input_elevation, "Input view elevation in degrees");
    demo->add_option("--lambda-max", da.lambda_max, "Schedule maximum (0 disables geometry)");
    demo->add_option("--lambda-min", da.lambda_min, "Schedule minimum");
    demo->add_option("--k", da.stiffness_k, "Bilateral sigmoid sharpness");
    demo->add_option("--iters", da.iters, "Max IRLS outer iterations");
    demo->add_option("--config", da.config, "JSON config file (CLI flags override)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e); // prints the message and usage hint
        return kExitUsage;
    }

    try {
        if (integrate->parsed()) {
            if (!ia.config.empty()) apply_config(integrate, ia.config);
            return run_integrate(ia, log);
        }
        if (mesh->parsed()) {
            if (!ma.config.empty()) apply_config(mesh, ma.config);
            return run_mesh(ma, log);
        }
        if (render->parsed()) {
            if (!ra.config.empty()) apply_config(render, ra.config);
            return run_render(ra, log);
        }
        if (schedule->parsed()) {
            if (!sa.config.empty()) apply_config(schedule, sa.config);
            return run_schedule(sa, log);
        }
        if (demo->parsed()) {
            if (!da.config.empty()) apply_config(demo, da.config);
            return run_demo(da, log);
        }
    } catch (const geomvd::SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitSolver;
    } catch (const geomvd::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const geomvd::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
