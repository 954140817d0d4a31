#include <doctest.h>

#include "covsteer/environment.hpp"
#include "covsteer/plot.hpp"
#include "covsteer/program_builder.hpp"
#include "covsteer/result_io.hpp"
#include "covsteer/solver.hpp"

using namespace covsteer;

namespace {

std::string scenario_path(const std::string& name) {
    return std::string(SCENARIO_DIR) + "/" + name;
}

}  // namespace

TEST_CASE("scenario-only rendering is byte identical across calls") {
    Scenario sc = load_scenario(scenario_path("doubleslit_wide.json"));
    const std::string a = render_svg(sc, nullptr);
    const std::string b = render_svg(sc, nullptr);
    CHECK(a == b);
    CHECK(a.rfind("<svg", 0) == 0);
    CHECK(a.find("</svg>") != std::string::npos);
    // Three filled obstacles plus dashed region outlines are present.
    std::size_t fills = 0, pos = 0;
    while ((pos = a.find("fill=\"#c0c4cc\"", pos)) != std::string::npos) {
        ++fills;
        ++pos;
    }
    CHECK(fills == 3);
    CHECK(a.find("stroke-dasharray") != std::string::npos);
}

TEST_CASE("rendering a result overlays the trajectory and ellipses") {
    Scenario sc = load_scenario(scenario_path("toy_corridor.json"));
    AssembledProgram ap = assemble(sc);
    InteriorPointBackend backend;
    SolveOptions opts;
    const SolveResult res = solve_micp(ap, backend, opts);
    REQUIRE(res.status == MipStatus::Optimal);
    const ResultDocument doc =
        make_result_document(sc, scenario_path("toy_corridor.json"), false, opts, res);

    const std::string a = render_svg(sc, &doc);
    const std::string b = render_svg(sc, &doc);
    CHECK(a == b);
    CHECK(a.find("<polyline") != std::string::npos);
    // One ellipse per step 0..N.
    std::size_t ellipses = 0, pos = 0;
    while ((pos = a.find("<ellipse", pos)) != std::string::npos) {
        ++ellipses;
        ++pos;
    }
    CHECK(ellipses == static_cast<std::size_t>(sc.horizon() + 1));
}

TEST_CASE("rendering requires planar positions") {
    Scenario sc = load_scenario(scenario_path("minimal_convex.json"));
    sc.position_dims = {0};
    CHECK_THROWS(render_svg(sc, nullptr));
}
