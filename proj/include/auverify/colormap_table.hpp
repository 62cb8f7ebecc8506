#pragma once

#include <array>
#include <cstdint>

namespace auverify {

using Rgb = std::array<std::uint8_t, 3>;

/// Blue -> white -> red. Entry 128 is the neutral color for zero relevance,
/// entry 255 the hottest.
inline constexpr std::array<Rgb, 256> kDivergingRedBlue = {{
    {  0,   0, 255}, {  2,   2, 255}, {  4,   4, 255}, {  6,   6, 255},
    {  8,   8, 255}, { 10,  10, 255}, { 12,  12, 255}, { 14,  14, 255},
    { 16,  16, 255}, { 18,  18, 255}, { 20,  20, 255}, { 22,  22, 255},
    { 24,  24, 255}, { 26,  26, 255}, { 28,  28, 255}, { 30,  30, 255},
    { 32,  32, 255}, { 34,  34, 255}, { 36,  36, 255}, { 38,  38, 255},
    { 40,  40, 255}, { 42,  42, 255}, { 44,  44, 255}, { 46,  46, 255},
    { 48,  48, 255}, { 50,  50, 255}, { 52,  52, 255}, { 54,  54, 255},
    { 56,  56, 255}, { 58,  58, 255}, { 60,  60, 255}, { 62,  62, 255},
    { 64,  64, 255}, { 66,  66, 255}, { 68,  68, 255}, { 70,  70, 255},
    { 72,  72, 255}, { 74,  74, 255}, { 76,  76, 255}, { 78,  78, 255},
    { 80,  80, 255}, { 82,  82, 255}, { 84,  84, 255}, { 86,  86, 255},
    { 88,  88, 255}, { 90,  90, 255}, { 92,  92, 255}, { 94,  94, 255},
    { 96,  96, 255}, { 98,  98, 255}, {100, 100, 255}, {102, 102, 255},
    {104, 104, 255}, {106, 106, 255}, {108, 108, 255}, {110, 110, 255},
    {112, 112, 255}, {114, 114, 255}, {116, 116, 255}, {118, 118, 255},
    {120, 120, 255}, {122, 122, 255}, {124, 124, 255}, {126, 126, 255},
    {128, 128, 255}, {129, 129, 255}, {131, 131, 255}, {133, 133, 255},
    {135, 135, 255}, {137, 137, 255}, {139, 139, 255}, {141, 141, 255},
    {143, 143, 255}, {145, 145, 255}, {147, 147, 255}, {149, 149, 255},
    {151, 151, 255}, {153, 153, 255}, {155, 155, 255}, {157, 157, 255},
    {159, 159, 255}, {161, 161, 255}, {163, 163, 255}, {165, 165, 255},
    {167, 167, 255}, {169, 169, 255}, {171, 171, 255}, {173, 173, 255},
    {175, 175, 255}, {177, 177, 255}, {179, 179, 255}, {181, 181, 255},
    {183, 183, 255}, {185, 185, 255}, {187, 187, 255}, {189, 189, 255},
    {191, 191, 255}, {193, 193, 255}, {195, 195, 255}, {197, 197, 255},
    {199, 199, 255}, {201, 201, 255}, {203, 203, 255}, {205, 205, 255},
    {207, 207, 255}, {209, 209, 255}, {211, 211, 255}, {213, 213, 255},
    {215, 215, 255}, {217, 217, 255}, {219, 219, 255}, {221, 221, 255},
    {223, 223, 255}, {225, 225, 255}, {227, 227, 255}, {229, 229, 255},
    {231, 231, 255}, {233, 233, 255}, {235, 235, 255}, {237, 237, 255},
    {239, 239, 255}, {241, 241, 255}, {243, 243, 255}, {245, 245, 255},
    {247, 247, 255}, {249, 249, 255}, {251, 251, 255}, {253, 253, 255},
    {255, 255, 255}, {255, 253, 253}, {255, 251, 251}, {255, 249, 249},
    {255, 247, 247}, {255, 245, 245}, {255, 243, 243}, {255, 241, 241},
    {255, 239, 239}, {255, 237, 237}, {255, 235, 235}, {255, 233, 233},
    {255, 231, 231}, {255, 229, 229}, {255, 227, 227}, {255, 225, 225},
    {255, 223, 223}, {255, 221, 221}, {255, 219, 219}, {255, 217, 217},
    {255, 215, 215}, {255, 213, 213}, {255, 211, 211}, {255, 209, 209},
    {255, 207, 207}, {255, 205, 205}, {255, 203, 203}, {255, 201, 201},
    {255, 199, 199}, {255, 197, 197}, {255, 195, 195}, {255, 193, 193},
    {255, 191, 191}, {255, 189, 189}, {255, 187, 187}, {255, 185, 185},
    {255, 183, 183}, {255, 181, 181}, {255, 179, 179}, {255, 177, 177},
    {255, 175, 175}, {255, 173, 173}, {255, 171, 171}, {255, 169, 169},
    {255, 167, 167}, {255, 165, 165}, {255, 163, 163}, {255, 161, 161},
    {255, 159, 159}, {255, 157, 157}, {255, 155, 155}, {255, 153, 153},
    {255, 151, 151}, {255, 149, 149}, {255, 147, 147}, {255, 145, 145},
    {255, 143, 143}, {255, 141, 141}, {255, 139, 139}, {255, 137, 137},
    {255, 135, 135}, {255, 133, 133}, {255, 131, 131}, {255, 129, 129},
    {255, 126, 126}, {255, 124, 124}, {255, 122, 122}, {255, 120, 120},
    {255, 118, 118}, {255, 116, 116}, {255, 114, 114}, {255, 112, 112},
    {255, 110, 110}, {255, 108, 108}, {255, 106, 106}, {255, 104, 104},
    {255, 102, 102}, {255, 100, 100}, {255,  98,  98}, {255,  96,  96},
    {255,  94,  94}, {255,  92,  92}, {255,  90,  90}, {255,  88,  88},
    {255,  86,  86}, {255,  84,  84}, {255,  82,  82}, {255,  80,  80},
    {255,  78,  78}, {255,  76,  76}, {255,  74,  74}, {255,  72,  72},
    {255,  70,  70}, {255,  68,  68}, {255,  66,  66}, {255,  64,  64},
    {255,  62,  62}, {255,  60,  60}, {255,  58,  58}, {255,  56,  56},
    {255,  54,  54}, {255,  52,  52}, {255,  50,  50}, {255,  48,  48},
    {255,  46,  46}, {255,  44,  44}, {255,  42,  42}, {255,  40,  40},
    {255,  38,  38}, {255,  36,  36}, {255,  34,  34}, {255,  32,  32},
    {255,  30,  30}, {255,  28,  28}, {255,  26,  26}, {255,  24,  24},
    {255,  22,  22}, {255,  20,  20}, {255,  18,  18}, {255,  16,  16},
    {255,  14,  14}, {255,  12,  12}, {255,  10,  10}, {255,   8,   8},
    {255,   6,   6}, {255,   4,   4}, {255,   2,   2}, {255,   0,   0},
}};

}  // namespace auverify
