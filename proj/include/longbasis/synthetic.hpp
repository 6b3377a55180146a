#pragma once

#include "longbasis/book_models.hpp"
#include "longbasis/jump_diffusion.hpp"
#include "longbasis/lee_carter.hpp"
#include "longbasis/panel.hpp"

#include <cstdint>

namespace longbasis {

// Published reference age profile for ages 60-89.
LCParams published_reference_profile();
// Published book level differences (LC+Cohorts book) for ages 60-89.
Vector published_book_levels();

enum class BookLink {
    // log m^B = log m^R + a_B + b^R k^B with k^B ~ AR(1)
    Relative,
    // book driven by its own independent copy of the reference dynamics
    Independent,
};

struct SyntheticWorldSpec {
    IntRange ages{60, 89};
    IntRange ref_years{1961, 2016};
    IntRange book_years{1961, 2005};

    JumpDiffusionParams ref_dynamics{-0.45, 0.25, 2.0, 1.5, 4.0, 8.0};
    RenewalFamily family = RenewalFamily::Weibull;
    JumpPersistence persistence = JumpPersistence::Permanent;
    bool jumps = true;

    AR1Params book_dynamics{0.0, 0.6, 1.0, true};
    bool book_levels = true;
    BookLink link = BookLink::Relative;

    // Exposure at the youngest age, decaying geometrically with age.
    double ref_exposure = 3.0e5;
    double ref_exposure_decay = 0.06;
    double book_exposure = 2.0e4;
    double book_exposure_decay = 0.07;

    // false: deaths equal expected counts exactly.
    bool poisson_noise = true;
    std::uint64_t seed = 1;
};

struct SyntheticWorld {
    MortalityPanel reference;
    MortalityPanel book;
    LCParams ref_truth;
    Vector a_B;
    Vector k_B;
    RateSurface ref_rates;
    RateSurface book_rates;
};

SyntheticWorld make_synthetic_world(const SyntheticWorldSpec& spec);

} // namespace longbasis
