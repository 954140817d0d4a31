#include "covsteer/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace covsteer {

namespace {

std::string fmt(double v) {
    if (!std::isfinite(v)) throw std::runtime_error("non-finite plot coordinate");
    if (v == 0.0) v = 0.0;  // normalize -0
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

struct Pt {
    double x, y;
};

/// Vertices of a bounded 2-D polytope {p : alpha_i' p <= beta_i}, ordered
/// counter-clockwise around the centroid. Faces must be 2-D.
std::vector<Pt> polygon_vertices(const std::vector<Halfspace>& faces) {
    const double tol = 1e-7;
    std::vector<Pt> pts;
    const int n = static_cast<int>(faces.size());
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const auto &a = faces[i].alpha, &b = faces[j].alpha;
            const double det = a[0] * b[1] - a[1] * b[0];
            if (std::abs(det) < 1e-12) continue;
            const double x = (faces[i].beta * b[1] - faces[j].beta * a[1]) / det;
            const double y = (a[0] * faces[j].beta - b[0] * faces[i].beta) / det;
            bool inside = true;
            for (int k = 0; k < n && inside; ++k)
                inside = faces[k].alpha[0] * x + faces[k].alpha[1] * y <=
                         faces[k].beta + tol;
            if (!inside) continue;
            bool dup = false;
            for (const auto& p : pts)
                if (std::hypot(p.x - x, p.y - y) < 1e-9) dup = true;
            if (!dup) pts.push_back({x, y});
        }
    }
    if (pts.size() < 3) return pts;
    double cx = 0, cy = 0;
    for (const auto& p : pts) {
        cx += p.x;
        cy += p.y;
    }
    cx /= pts.size();
    cy /= pts.size();
    std::sort(pts.begin(), pts.end(), [&](const Pt& a, const Pt& b) {
        return std::atan2(a.y - cy, a.x - cx) < std::atan2(b.y - cy, b.x - cx);
    });
    return pts;
}

}  // namespace

std::string render_svg(const Scenario& sc, const ResultDocument* result) {
    if (sc.n_pos() != 2)
        throw std::runtime_error("plotting requires exactly two position dimensions");

    VectorXd lo, hi;
    sc.domain_box(lo, hi);
    const double pad_x = 0.05 * (hi[0] - lo[0]), pad_y = 0.05 * (hi[1] - lo[1]);
    const double x0 = lo[0] - pad_x, x1 = hi[0] + pad_x;
    const double y0 = lo[1] - pad_y, y1 = hi[1] + pad_y;

    // World-to-pixel mapping; y flipped so world +y points up.
    const double width = 900.0;
    const double scale = width / (x1 - x0);
    const double height = (y1 - y0) * scale;
    auto px = [&](double wx) { return (wx - x0) * scale; };
    auto py = [&](double wy) { return (y1 - wy) * scale; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width)
        << "\" height=\"" << fmt(height) << "\" viewBox=\"0 0 " << fmt(width)
        << " " << fmt(height) << "\">\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"" << fmt(width) << "\" height=\""
        << fmt(height) << "\" fill=\"#ffffff\"/>\n";

    auto poly_attr = [&](const std::vector<Pt>& pts) {
        std::ostringstream os;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i) os << " ";
            os << fmt(px(pts[i].x)) << "," << fmt(py(pts[i].y));
        }
        return os.str();
    };

    // Domain outline.
    const auto dom = polygon_vertices(sc.domain.faces);
    if (dom.size() >= 3)
        svg << "<polygon points=\"" << poly_attr(dom)
            << "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1.5\"/>\n";

    // Regions: outlined, clipped against the domain.
    for (const auto& region : sc.regions) {
        std::vector<Halfspace> faces = region.faces;
        faces.insert(faces.end(), sc.domain.faces.begin(), sc.domain.faces.end());
        const auto pts = polygon_vertices(faces);
        if (pts.size() >= 3)
            svg << "<polygon points=\"" << poly_attr(pts)
                << "\" fill=\"none\" stroke=\"#2b8a3e\" stroke-width=\"1\""
                << " stroke-dasharray=\"6,4\"/>\n";
    }

    // Obstacles: filled.
    for (const auto& obstacle : sc.obstacles) {
        std::vector<Halfspace> faces = obstacle.faces;
        faces.insert(faces.end(), sc.domain.faces.begin(), sc.domain.faces.end());
        const auto pts = polygon_vertices(faces);
        if (pts.size() >= 3)
            svg << "<polygon points=\"" << poly_attr(pts)
                << "\" fill=\"#c0c4cc\" stroke=\"#7a7f8a\" stroke-width=\"1\"/>\n";
    }

    if (result && result->means.rows() > 0) {
        const int px0 = sc.position_dims[0], px1 = sc.position_dims[1];
        const int N = static_cast<int>(result->means.rows()) - 1;

        // 3-sigma position ellipses.
        for (int k = 0; k <= N && k < static_cast<int>(result->covariances.size());
             ++k) {
            Eigen::Matrix2d P;
            P << result->covariances[k](px0, px0), result->covariances[k](px0, px1),
                result->covariances[k](px1, px0), result->covariances[k](px1, px1);
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(P);
            const double a = 3.0 * std::sqrt(std::max(0.0, es.eigenvalues()[1]));
            const double b = 3.0 * std::sqrt(std::max(0.0, es.eigenvalues()[0]));
            const double ang =
                std::atan2(es.eigenvectors()(1, 1), es.eigenvectors()(0, 1));
            const double cx = result->means(k, px0), cy = result->means(k, px1);
            const bool endpoint = (k == 0 || k == N);
            svg << "<ellipse cx=\"0\" cy=\"0\" rx=\"" << fmt(a * scale)
                << "\" ry=\"" << fmt(b * scale) << "\" transform=\"translate("
                << fmt(px(cx)) << "," << fmt(py(cy)) << ") rotate("
                << fmt(-ang * 180.0 / M_PI) << ")\" fill=\"none\" stroke=\""
                << (endpoint ? "#d9480f" : "#1c7ed6") << "\" stroke-width=\""
                << (endpoint ? "1.8" : "0.9") << "\"/>\n";
        }

        // Mean trajectory.
        svg << "<polyline points=\"";
        for (int k = 0; k <= N; ++k) {
            if (k) svg << " ";
            svg << fmt(px(result->means(k, px0))) << ","
                << fmt(py(result->means(k, px1)));
        }
        svg << "\" fill=\"none\" stroke=\"#1c3faa\" stroke-width=\"1.6\"/>\n";
        for (int k = 0; k <= N; ++k)
            svg << "<circle cx=\"" << fmt(px(result->means(k, px0))) << "\" cy=\""
                << fmt(py(result->means(k, px1)))
                << "\" r=\"2.2\" fill=\"#1c3faa\"/>\n";
    }

    svg << "</svg>\n";
    return svg.str();
}

void save_svg(const std::string& svg, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << svg;
}

}  // namespace covsteer
