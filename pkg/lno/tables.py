"""
Reference kernel weights for the windowed Legendre transform.

Rows are window points i = 0..N-1, columns are the first eight modes
(column 0 is the constant mode). Values are rounded to four decimals, so
generated kernels are compared with an absolute tolerance of 5e-5.
"""

from typing import Dict, Tuple

import numpy as np

TABLE_TOLERANCE = 5e-5
TABLE_MODES = 8

_PHI_12 = np.array([
    [ 0.0400, -0.1145,  0.1732, -0.2082,  0.2154, -0.1944,  0.1492, -0.0873],
    [ 0.0924, -0.2323,  0.2573, -0.1474, -0.0565,  0.2694, -0.3968,  0.3756],
    [ 0.1042, -0.1979,  0.0525,  0.2302, -0.3988,  0.2658,  0.1156, -0.4673],
    [ 0.0897, -0.1089, -0.1131,  0.2743, -0.0962, -0.2563,  0.3350,  0.0116],
    [ 0.0721, -0.0595, -0.1299,  0.1644,  0.0556, -0.2012,  0.0572,  0.1370],
    [ 0.1016, -0.0416, -0.2399,  0.1412,  0.2804, -0.2618, -0.2601,  0.3821],
    [ 0.1016,  0.0416, -0.2399, -0.1412,  0.2804,  0.2618, -0.2601, -0.3821],
    [ 0.0721,  0.0595, -0.1299, -0.1644,  0.0556,  0.2012,  0.0572, -0.1370],
    [ 0.0897,  0.1089, -0.1131, -0.2743, -0.0962,  0.2563,  0.3350, -0.0116],
    [ 0.1042,  0.1979,  0.0525, -0.2302, -0.3988, -0.2658,  0.1156,  0.4673],
    [ 0.0924,  0.2323,  0.2573,  0.1474, -0.0565, -0.2694, -0.3968, -0.3756],
    [ 0.0400,  0.1145,  0.1732,  0.2082,  0.2154,  0.1944,  0.1492,  0.0873],
])

_PSI_12 = np.array([
    [ 1.0000, -1.0000,  1.0000, -1.0000,  1.0000, -1.0000,  1.0000, -1.0000],
    [ 1.0000, -0.8182,  0.5041, -0.1420, -0.1748,  0.3710, -0.4109,  0.3063],
    [ 1.0000, -0.6364,  0.1074,  0.3103, -0.4261,  0.2399,  0.0752, -0.2945],
    [ 1.0000, -0.4545, -0.1901,  0.4470, -0.2130, -0.1833,  0.3303, -0.1217],
    [ 1.0000, -0.2727, -0.3884,  0.3584,  0.1203, -0.3457,  0.0726,  0.2596],
    [ 1.0000, -0.0909, -0.4876,  0.1345,  0.3443, -0.1639, -0.2596,  0.1843],
    [ 1.0000,  0.0909, -0.4876, -0.1345,  0.3443,  0.1639, -0.2596, -0.1843],
    [ 1.0000,  0.2727, -0.3884, -0.3584,  0.1203,  0.3457,  0.0726, -0.2596],
    [ 1.0000,  0.4545, -0.1901, -0.4470, -0.2130,  0.1833,  0.3303,  0.1217],
    [ 1.0000,  0.6364,  0.1074, -0.3103, -0.4261, -0.2399,  0.0752,  0.2945],
    [ 1.0000,  0.8182,  0.5041,  0.1420, -0.1748, -0.3710, -0.4109, -0.3063],
    [ 1.0000,  1.0000,  1.0000,  1.0000,  1.0000,  1.0000,  1.0000,  1.0000],
])

_PHI_18 = np.array([
    [ 0.0307, -0.0882,  0.1347, -0.1647,  0.1754, -0.1669,  0.1421, -0.1062],
    [ 0.0577, -0.1525,  0.1924, -0.1623,  0.0714,  0.0504, -0.1630,  0.2299],
    [ 0.0601, -0.1371,  0.1116,  0.0108, -0.1612,  0.2478, -0.2119,  0.0643],
    [ 0.0582, -0.1115,  0.0345,  0.1163, -0.2070,  0.1443,  0.0375, -0.1995],
    [ 0.0518, -0.0842, -0.0134,  0.1433, -0.1548,  0.0118,  0.1587, -0.1924],
    [ 0.0654, -0.0852, -0.0709,  0.2044, -0.1041, -0.1575,  0.2735, -0.0705],
    [ 0.0662, -0.0529, -0.1303,  0.1632,  0.0780, -0.2509,  0.0509,  0.2642],
    [ 0.0440, -0.0227, -0.0976,  0.0723,  0.0972, -0.1194, -0.0641,  0.1459],
    [ 0.0660, -0.0178, -0.1610,  0.0613,  0.2049, -0.1176, -0.2238,  0.1805],
    [ 0.0660,  0.0178, -0.1610, -0.0613,  0.2049,  0.1176, -0.2238, -0.1805],
    [ 0.0440,  0.0227, -0.0976, -0.0723,  0.0972,  0.1194, -0.0641, -0.1459],
    [ 0.0662,  0.0529, -0.1303, -0.1632,  0.0780,  0.2509,  0.0509, -0.2642],
    [ 0.0654,  0.0852, -0.0709, -0.2044, -0.1041,  0.1575,  0.2735,  0.0705],
    [ 0.0518,  0.0842, -0.0134, -0.1433, -0.1548, -0.0118,  0.1587,  0.1924],
    [ 0.0582,  0.1115,  0.0345, -0.1163, -0.2070, -0.1443,  0.0375,  0.1995],
    [ 0.0601,  0.1371,  0.1116, -0.0108, -0.1612, -0.2478, -0.2119, -0.0643],
    [ 0.0577,  0.1525,  0.1924,  0.1623,  0.0714, -0.0504, -0.1630, -0.2299],
    [ 0.0307,  0.0882,  0.1347,  0.1647,  0.1754,  0.1669,  0.1421,  0.1062],
])

_PSI_18 = np.array([
    [ 1.0000, -1.0000,  1.0000, -1.0000,  1.0000, -1.0000,  1.0000, -1.0000],
    [ 1.0000, -0.8824,  0.6678, -0.3939,  0.1073,  0.1447, -0.3234,  0.4060],
    [ 1.0000, -0.7647,  0.3772,  0.0291, -0.3218,  0.4197, -0.3202,  0.0950],
    [ 1.0000, -0.6471,  0.1280,  0.2933, -0.4281,  0.2640,  0.0436, -0.2787],
    [ 1.0000, -0.5294, -0.0796,  0.4232, -0.3324, -0.0218,  0.2981, -0.2744],
    [ 1.0000, -0.4118, -0.2457,  0.4431, -0.1350, -0.2544,  0.3046, -0.0149],
    [ 1.0000, -0.2941, -0.3702,  0.3776,  0.0833, -0.3462,  0.1172,  0.2327],
    [ 1.0000, -0.1765, -0.4533,  0.2510,  0.2625, -0.2841, -0.1268,  0.2851],
    [ 1.0000, -0.0588, -0.4948,  0.0877,  0.3621, -0.1085, -0.2900,  0.1247],
    [ 1.0000,  0.0588, -0.4948, -0.0877,  0.3621,  0.1085, -0.2900, -0.1247],
    [ 1.0000,  0.1765, -0.4533, -0.2510,  0.2625,  0.2841, -0.1268, -0.2851],
    [ 1.0000,  0.2941, -0.3702, -0.3776,  0.0833,  0.3462,  0.1172, -0.2327],
    [ 1.0000,  0.4118, -0.2457, -0.4431, -0.1350,  0.2544,  0.3046,  0.0149],
    [ 1.0000,  0.5294, -0.0796, -0.4232, -0.3324,  0.0218,  0.2981,  0.2744],
    [ 1.0000,  0.6471,  0.1280, -0.2933, -0.4281, -0.2640,  0.0436,  0.2787],
    [ 1.0000,  0.7647,  0.3772, -0.0291, -0.3218, -0.4197, -0.3202, -0.0950],
    [ 1.0000,  0.8824,  0.6678,  0.3939,  0.1073, -0.1447, -0.3234, -0.4060],
    [ 1.0000,  1.0000,  1.0000,  1.0000,  1.0000,  1.0000,  1.0000,  1.0000],
])

_PHI_24 = np.array([
    [ 0.0210, -0.0612,  0.0966, -0.1245,  0.1427, -0.1502,  0.1469, -0.1334],
    [ 0.0454, -0.1241,  0.1697, -0.1696,  0.1234, -0.0419, -0.0551,  0.1446],
    [ 0.0430, -0.1061,  0.1114, -0.0508, -0.0525,  0.1545, -0.2093,  0.1895],
    [ 0.0416, -0.0924,  0.0674,  0.0257, -0.1311,  0.1796, -0.1320,  0.0053],
    [ 0.0394, -0.0792,  0.0340,  0.0699, -0.1511,  0.1346, -0.0138, -0.1370],
    [ 0.0544, -0.0925, -0.0051,  0.1507, -0.1850,  0.0411,  0.1723, -0.2571],
    [ 0.0412, -0.0558, -0.0401,  0.1290, -0.0769, -0.0858,  0.1764, -0.0703],
    [ 0.0359, -0.0421, -0.0474,  0.1070, -0.0311, -0.1027,  0.1208,  0.0142],
    [ 0.0458, -0.0451, -0.0775,  0.1296,  0.0090, -0.1694,  0.1097,  0.1208],
    [ 0.0519, -0.0311, -0.1143,  0.1015,  0.1089, -0.1753, -0.0553,  0.2285],
    [ 0.0315, -0.0117, -0.0742,  0.0391,  0.0864, -0.0702, -0.0806,  0.0977],
    [ 0.0488, -0.0098, -0.1204,  0.0340,  0.1574, -0.0659, -0.1799,  0.1028],
    [ 0.0488,  0.0098, -0.1204, -0.0340,  0.1574,  0.0659, -0.1799, -0.1028],
    [ 0.0315,  0.0117, -0.0742, -0.0391,  0.0864,  0.0702, -0.0806, -0.0977],
    [ 0.0519,  0.0311, -0.1143, -0.1015,  0.1089,  0.1753, -0.0553, -0.2285],
    [ 0.0458,  0.0451, -0.0775, -0.1296,  0.0090,  0.1694,  0.1097, -0.1208],
    [ 0.0359,  0.0421, -0.0474, -0.1070, -0.0311,  0.1027,  0.1208, -0.0142],
    [ 0.0412,  0.0558, -0.0401, -0.1290, -0.0769,  0.0858,  0.1764,  0.0703],
    [ 0.0544,  0.0925, -0.0051, -0.1507, -0.1850, -0.0411,  0.1723,  0.2571],
    [ 0.0394,  0.0792,  0.0340, -0.0699, -0.1511, -0.1346, -0.0138,  0.1370],
    [ 0.0416,  0.0924,  0.0674, -0.0257, -0.1311, -0.1796, -0.1320, -0.0053],
    [ 0.0430,  0.1061,  0.1114,  0.0508, -0.0525, -0.1545, -0.2093, -0.1895],
    [ 0.0454,  0.1241,  0.1697,  0.1696,  0.1234,  0.0419, -0.0551, -0.1446],
    [ 0.0210,  0.0612,  0.0966,  0.1245,  0.1427,  0.1502,  0.1469,  0.1334],
])

_PSI_24 = np.array([
    [ 1.0000, -1.0000,  1.0000, -1.0000,  1.0000, -1.0000,  1.0000, -1.0000],
    [ 1.0000, -0.9130,  0.7505, -0.5333,  0.2893, -0.0488, -0.1594,  0.3121],
    [ 1.0000, -0.8261,  0.5236, -0.1702, -0.1467,  0.3542, -0.4143,  0.3319],
    [ 1.0000, -0.7391,  0.3195,  0.0992, -0.3679,  0.4101, -0.2492, -0.0095],
    [ 1.0000, -0.6522,  0.1380,  0.2848, -0.4285,  0.2752,  0.0280, -0.2699],
    [ 1.0000, -0.5652, -0.0208,  0.3964, -0.3765,  0.0659,  0.2454, -0.3141],
    [ 1.0000, -0.4783, -0.1569,  0.4439, -0.2539, -0.1366,  0.3313, -0.1772],
    [ 1.0000, -0.3913, -0.2703,  0.4372, -0.0966, -0.2817,  0.2826,  0.0361],
    [ 1.0000, -0.3043, -0.3611,  0.3860,  0.0652, -0.3445,  0.1379,  0.2174],
    [ 1.0000, -0.2174, -0.4291,  0.3004,  0.2076, -0.3215, -0.0448,  0.2937],
    [ 1.0000, -0.1304, -0.4745,  0.1901,  0.3125, -0.2254, -0.2065,  0.2433],
    [ 1.0000, -0.0435, -0.4972,  0.0650,  0.3679, -0.0808, -0.3002,  0.0935],
    [ 1.0000,  0.0435, -0.4972, -0.0650,  0.3679,  0.0808, -0.3002, -0.0935],
    [ 1.0000,  0.1304, -0.4745, -0.1901,  0.3125,  0.2254, -0.2065, -0.2433],
    [ 1.0000,  0.2174, -0.4291, -0.3004,  0.2076,  0.3215, -0.0448, -0.2937],
    [ 1.0000,  0.3043, -0.3611, -0.3860,  0.0652,  0.3445,  0.1379, -0.2174],
    [ 1.0000,  0.3913, -0.2703, -0.4372, -0.0966,  0.2817,  0.2826, -0.0361],
    [ 1.0000,  0.4783, -0.1569, -0.4439, -0.2539,  0.1366,  0.3313,  0.1772],
    [ 1.0000,  0.5652, -0.0208, -0.3964, -0.3765, -0.0659,  0.2454,  0.3141],
    [ 1.0000,  0.6522,  0.1380, -0.2848, -0.4285, -0.2752,  0.0280,  0.2699],
    [ 1.0000,  0.7391,  0.3195, -0.0992, -0.3679, -0.4101, -0.2492,  0.0095],
    [ 1.0000,  0.8261,  0.5236,  0.1702, -0.1467, -0.3542, -0.4143, -0.3319],
    [ 1.0000,  0.9130,  0.7505,  0.5333,  0.2893,  0.0488, -0.1594, -0.3121],
    [ 1.0000,  1.0000,  1.0000,  1.0000,  1.0000,  1.0000,  1.0000,  1.0000],
])

# window size -> (decomposition, reconstruction), each of shape (N, 8)
KERNEL_TABLES: Dict[int, Tuple[np.ndarray, np.ndarray]] = {
    12: (_PHI_12, _PSI_12),
    18: (_PHI_18, _PSI_18),
    24: (_PHI_24, _PSI_24),
}


def has_table(window: int, modes: int) -> bool:
    """True when a reference table covers kernels of this size"""
    return window in KERNEL_TABLES and modes >= TABLE_MODES


def table_deviation(window: int, phi: np.ndarray, psi: np.ndarray) -> float:
    """
    Largest absolute difference between 1-D kernels and the reference table.

    Args:
        window: window size N (12, 18 or 24)
        phi: decomposition kernel of shape (M, N), M >= 8
        psi: reconstruction kernel of shape (M, N)

    Returns:
        max |generated - reference| over all 2 x 8 x N entries
    """
    if window not in KERNEL_TABLES:
        raise KeyError(f"No reference table for N={window}")
    table_phi, table_psi = KERNEL_TABLES[window]
    return float(max(
        np.max(np.abs(phi[:TABLE_MODES].T - table_phi)),
        np.max(np.abs(psi[:TABLE_MODES].T - table_psi)),
    ))
