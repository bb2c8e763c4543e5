// CIE 1931 2-degree colour matching functions and the CIE D65 illuminant SPD,
// tabulated at 5 nm from 360 nm to 830 nm. D65 values above 780 nm come from
// the CIE daylight basis functions at CCT 6504 K.
#pragma once

#include <array>

namespace hsd::cie {

struct CmfRow {
  double wavelength_nm;
  double x_bar;
  double y_bar;
  double z_bar;
  double d65;
};

inline constexpr std::array<CmfRow, 95> kTable = {{
    {360, 1.299000e-04, 3.917000e-06, 6.061000e-04, 46.6383},
    {365, 2.321000e-04, 6.965000e-06, 1.086000e-03, 49.3637},
    {370, 4.149000e-04, 1.239000e-05, 1.946000e-03, 52.0891},
    {375, 7.416000e-04, 2.202000e-05, 3.486000e-03, 51.0323},
    {380, 1.368000e-03, 3.900000e-05, 6.450001e-03, 49.9755},
    {385, 2.236000e-03, 6.400000e-05, 1.054999e-02, 52.3118},
    {390, 4.243000e-03, 1.200000e-04, 2.005001e-02, 54.6482},
    {395, 7.650000e-03, 2.170000e-04, 3.621000e-02, 68.7015},
    {400, 1.431000e-02, 3.960000e-04, 6.785001e-02, 82.7549},
    {405, 2.319000e-02, 6.400000e-04, 1.102000e-01, 87.1204},
    {410, 4.351000e-02, 1.210000e-03, 2.074000e-01, 91.4860},
    {415, 7.763000e-02, 2.180000e-03, 3.713000e-01, 92.4589},
    {420, 1.343800e-01, 4.000000e-03, 6.456000e-01, 93.4318},
    {425, 2.147700e-01, 7.300000e-03, 1.039050e+00, 90.0570},
    {430, 2.839000e-01, 1.160000e-02, 1.385600e+00, 86.6823},
    {435, 3.285000e-01, 1.684000e-02, 1.622960e+00, 95.7736},
    {440, 3.482800e-01, 2.300000e-02, 1.747060e+00, 104.8650},
    {445, 3.480600e-01, 2.980000e-02, 1.782600e+00, 110.9360},
    {450, 3.362000e-01, 3.800000e-02, 1.772110e+00, 117.0080},
    {455, 3.187000e-01, 4.800000e-02, 1.744100e+00, 117.4100},
    {460, 2.908000e-01, 6.000000e-02, 1.669200e+00, 117.8120},
    {465, 2.511000e-01, 7.390000e-02, 1.528100e+00, 116.3360},
    {470, 1.953600e-01, 9.098000e-02, 1.287640e+00, 114.8610},
    {475, 1.421000e-01, 1.126000e-01, 1.041900e+00, 115.3920},
    {480, 9.564000e-02, 1.390200e-01, 8.129501e-01, 115.9230},
    {485, 5.795001e-02, 1.693000e-01, 6.162000e-01, 112.3670},
    {490, 3.201000e-02, 2.080200e-01, 4.651800e-01, 108.8110},
    {495, 1.470000e-02, 2.586000e-01, 3.533000e-01, 109.0820},
    {500, 4.900000e-03, 3.230000e-01, 2.720000e-01, 109.3540},
    {505, 2.400000e-03, 4.073000e-01, 2.123000e-01, 108.5780},
    {510, 9.300000e-03, 5.030000e-01, 1.582000e-01, 107.8020},
    {515, 2.910000e-02, 6.082000e-01, 1.117000e-01, 106.2960},
    {520, 6.327000e-02, 7.100000e-01, 7.824999e-02, 104.7900},
    {525, 1.096000e-01, 7.932000e-01, 5.725001e-02, 106.2390},
    {530, 1.655000e-01, 8.620000e-01, 4.216000e-02, 107.6890},
    {535, 2.257499e-01, 9.148501e-01, 2.984000e-02, 106.0470},
    {540, 2.904000e-01, 9.540000e-01, 2.030000e-02, 104.4050},
    {545, 3.597000e-01, 9.803000e-01, 1.340000e-02, 104.2250},
    {550, 4.334499e-01, 9.949501e-01, 8.749999e-03, 104.0460},
    {555, 5.120501e-01, 1.000000e+00, 5.749999e-03, 102.0230},
    {560, 5.945000e-01, 9.950000e-01, 3.900000e-03, 100.0000},
    {565, 6.784000e-01, 9.786000e-01, 2.749999e-03, 98.1671},
    {570, 7.621000e-01, 9.520000e-01, 2.100000e-03, 96.3342},
    {575, 8.425000e-01, 9.154000e-01, 1.800000e-03, 96.0611},
    {580, 9.163000e-01, 8.700000e-01, 1.650001e-03, 95.7880},
    {585, 9.786000e-01, 8.163000e-01, 1.400000e-03, 92.2368},
    {590, 1.026300e+00, 7.570000e-01, 1.100000e-03, 88.6856},
    {595, 1.056700e+00, 6.949000e-01, 1.000000e-03, 89.3459},
    {600, 1.062200e+00, 6.310000e-01, 8.000000e-04, 90.0062},
    {605, 1.045600e+00, 5.668000e-01, 6.000000e-04, 89.8026},
    {610, 1.002600e+00, 5.030000e-01, 3.400000e-04, 89.5991},
    {615, 9.384000e-01, 4.412000e-01, 2.400000e-04, 88.6489},
    {620, 8.544499e-01, 3.810000e-01, 1.900000e-04, 87.6987},
    {625, 7.514000e-01, 3.210000e-01, 1.000000e-04, 85.4936},
    {630, 6.424000e-01, 2.650000e-01, 4.999999e-05, 83.2886},
    {635, 5.419000e-01, 2.170000e-01, 3.000000e-05, 83.4939},
    {640, 4.479000e-01, 1.750000e-01, 2.000000e-05, 83.6992},
    {645, 3.608000e-01, 1.382000e-01, 1.000000e-05, 81.8630},
    {650, 2.835000e-01, 1.070000e-01, -1.905824e-21, 80.0268},
    {655, 2.187000e-01, 8.160000e-02, 0.000000e+00, 80.1207},
    {660, 1.649000e-01, 6.100000e-02, 0.000000e+00, 80.2146},
    {665, 1.212000e-01, 4.458000e-02, 0.000000e+00, 81.2462},
    {670, 8.740000e-02, 3.200000e-02, 0.000000e+00, 82.2778},
    {675, 6.360000e-02, 2.320000e-02, 0.000000e+00, 80.2810},
    {680, 4.677000e-02, 1.700000e-02, 0.000000e+00, 78.2842},
    {685, 3.290000e-02, 1.192000e-02, 0.000000e+00, 74.0027},
    {690, 2.270000e-02, 8.210000e-03, 0.000000e+00, 69.7213},
    {695, 1.584000e-02, 5.723000e-03, 0.000000e+00, 70.6652},
    {700, 1.135916e-02, 4.102000e-03, 0.000000e+00, 71.6091},
    {705, 8.110916e-03, 2.929000e-03, 0.000000e+00, 72.9790},
    {710, 5.790346e-03, 2.091000e-03, 0.000000e+00, 74.3490},
    {715, 4.109457e-03, 1.484000e-03, 0.000000e+00, 67.9765},
    {720, 2.899327e-03, 1.047000e-03, 0.000000e+00, 61.6040},
    {725, 2.049190e-03, 7.400000e-04, 0.000000e+00, 65.7448},
    {730, 1.439971e-03, 5.200000e-04, 0.000000e+00, 69.8856},
    {735, 9.999493e-04, 3.611000e-04, 0.000000e+00, 72.4863},
    {740, 6.900786e-04, 2.492000e-04, 0.000000e+00, 75.0870},
    {745, 4.760213e-04, 1.719000e-04, 0.000000e+00, 69.3398},
    {750, 3.323011e-04, 1.200000e-04, 0.000000e+00, 63.5927},
    {755, 2.348261e-04, 8.480000e-05, 0.000000e+00, 55.0054},
    {760, 1.661505e-04, 6.000000e-05, 0.000000e+00, 46.4182},
    {765, 1.174130e-04, 4.240000e-05, 0.000000e+00, 56.6118},
    {770, 8.307527e-05, 3.000000e-05, 0.000000e+00, 66.8054},
    {775, 5.870652e-05, 2.120000e-05, 0.000000e+00, 65.0941},
    {780, 4.150994e-05, 1.499000e-05, 0.000000e+00, 63.3828},
    {785, 2.935326e-05, 1.060000e-05, 0.000000e+00, 63.8155},
    {790, 2.067383e-05, 7.465700e-06, 0.000000e+00, 64.2758},
    {795, 1.455977e-05, 5.257800e-06, 0.000000e+00, 61.8510},
    {800, 1.025398e-05, 3.702900e-06, 0.000000e+00, 59.4261},
    {805, 7.221456e-06, 2.607800e-06, 0.000000e+00, 55.6815},
    {810, 5.085868e-06, 1.836600e-06, 0.000000e+00, 51.9369},
    {815, 3.581652e-06, 1.293400e-06, 0.000000e+00, 54.6764},
    {820, 2.522525e-06, 9.109300e-07, 0.000000e+00, 57.4159},
    {825, 1.776509e-06, 6.415300e-07, 0.000000e+00, 58.8511},
    {830, 1.251141e-06, 4.518100e-07, 0.000000e+00, 60.2864},
}};

}  // namespace hsd::cie
