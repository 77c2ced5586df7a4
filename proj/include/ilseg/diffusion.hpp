#pragma once

#include "ilseg/volume.hpp"

namespace ilseg {

enum class EdgeStop { tukey, exponential };

struct DiffusionParams {
    int iterations = 5;
    double step = 1.0 / 7.0;      // stability requires step <= 1/6 for the 6-neighbor scheme
    double scale_sigma = 30.0;    // edge-stopping scale in HU
    EdgeStop edge_stop = EdgeStop::tukey;

    void validate() const;
};

// Edge-preserving anisotropic diffusion. Per iteration each voxel is updated
// by step * sum over 6-neighbor faces of g(d)*d, with the flux computed once
// per face (conservative) and replicated (Neumann) boundaries. Tukey's
// biweight g(x) = (1 - (x/s)^2)^2 for |x| <= s else 0, s = scale_sigma*sqrt(5);
// the exponential option uses g(x) = exp(-(x/scale_sigma)^2). Spacing is
// ignored (unit grid): the pipeline runs after isotropic resampling.
Volume diffuse(const Volume& v, const DiffusionParams& p);

}  // namespace ilseg
