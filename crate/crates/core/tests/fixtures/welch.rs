// Generated with scipy.stats.ttest_ind(a, b, equal_var=False), scipy 1.15.3
/// (a, b, t, dof, two-sided p)
pub type Fixture = (&'static [f64], &'static [f64], f64, f64, f64);

pub const WELCH_FIXTURES: &[Fixture] = &[
    (&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0], -1.0, 8.0, 0.34659350708733416),
    (&[13.132, 15.536, 8.549, 16.022, 13.838, 12.382, 15.352, 7.967, 14.427, 12.363, 16.473, 16.591, 11.655, 11.636, 9.701, 12.16, 16.148, 18.086, 15.822, 15.123], &[9.032, 14.74, 12.348, 18.073, 14.539, 20.847, 11.236, 17.532, 14.662], -0.8250678706084155, 12.44777267175451, 0.42486268859246823),
    (&[-1.74, -0.818, 4.237, -4.635, -2.756, 1.341, 2.429, -6.972, -0.848, 3.479, 3.562], &[6.111, 15.018, 4.55, 9.134, 6.237, 13.334, 3.692, 13.45, 2.511, 1.604], -4.124243339215122, 16.54950251243616, 0.0007454867461108334),
    (&[9.757, 10.125, 10.101, 10.77, 10.703, 10.372, 10.798, 10.818, 9.313, 11.732, 10.092, 9.682, 10.568, 9.769, 10.588, 9.245, 10.66, 9.199, 10.403, 9.971, 9.759, 10.24, 9.705, 9.561, 10.417, 11.546, 9.395, 10.976], &[0.836, 2.474, -4.568, 5.198, 4.21, 8.237, 1.815, 4.545], 5.511669097081391, 7.121287394443227, 0.0008446062081205443),
    (&[-2.132, 3.887, -1.496, 6.697, 3.404, 5.704, 3.458, 7.184, 1.313, 3.068, 7.745, -1.465, 3.561], &[7.959, 5.18, 17.46, 10.538, 9.902, 4.358, 6.12, 16.175, 10.537, 9.469, 15.495, 6.918, 19.645, 9.634, 8.902, 10.155, 11.683, 15.037, 7.964, 7.331], -5.6069244624691565, 29.740137240781884, 4.325019385107479e-06),
    (&[-1.846, 5.219, -4.503, 7.268, -4.856, 0.065, 1.443, 5.445, 7.632, 0.728, 9.763, -3.523, 2.088, -0.672, 3.288, -4.17, -4.885, 6.766, 5.694, 3.233, -2.949, 3.384, 2.675, 6.523, 1.627, -7.413, -0.571, 0.353, 4.364, -0.725, -4.691, 6.116, 2.374, -4.883, -2.761, 4.985, -6.115, 5.224, 0.599], &[4.87, 5.433, 7.286, 4.376, 7.505, 3.39, 4.363, 6.425, 4.59, 4.994, 6.294, 6.491, 5.943, 4.733, 6.105, 5.548, 6.751, 5.825, 4.434, 5.221, 3.547], -5.741827875774387, 46.4317672673676, 6.85069224476218e-07),
    (&[-3.404, -0.43, 2.9, 0.206, 1.152], &[-1.531, 2.685, -0.109, -2.874, 4.386, -1.289, 1.221, 4.577, 3.406, 1.765, -0.006, 2.533, 1.752, 3.66, 2.731, 3.462, -1.327, 0.055, 2.241, 2.689, 0.559, 0.393, 1.84, 2.166, 6.111, 1.075, 3.051, -1.776, 1.683, 1.209, -0.866, -0.184, 0.514, 0.221], -1.1602278897409761, 4.936013708215727, 0.29897881372336454),
    (&[-2.719, 1.676, -2.189, -1.129, -1.659, -1.06, -5.675, -2.644, 5.51, -0.238, -2.161, -3.284, -0.034, -1.496, -0.67, 1.914, -0.952, -1.872, -3.926, -6.719, 0.155, -0.114, -4.107, -3.71, -5.807, -5.399, -2.883, -1.754, 1.907, 0.683, -3.659, 1.658, -9.162, -3.06], &[2.677, 4.897, 8.501, 3.049, 10.797], -4.7502257729214366, 4.805071682886658, 0.00565464748794537),
    (&[16.04, 14.769, 9.391, 14.309, 4.744, 2.471, 9.171, 15.735, 7.135, 11.293, 13.43, 8.29, 11.662, 5.304, 13.563], &[11.017, 9.884], 0.029585690804355393, 11.303246338657821, 0.9769134143182141),
    (&[-4.159, -4.623, -0.852, -4.11, -4.102, -3.973, -5.739, -4.853, -4.536, -3.443, -2.978, -5.215, -2.22], &[5.247, 5.958, 3.052, 4.212, 3.864, 0.993, -1.382, 4.234, 3.603, -0.383, 2.711, -0.612, 12.593, 4.777, 5.194, 6.323, -12.381, 2.6, 7.207, -2.232, 4.003, 5.017, -2.773, 15.643, 2.923], -6.442221839275199, 29.221686236164135, 4.605339659574898e-07),
    (&[11.103, -4.555, -11.506, 0.955, -1.005, 4.563, -9.466, -3.92, -2.263, -3.416, -4.252, -4.835, 6.245, -4.155, 3.591, -2.968, 0.915, 3.687, 0.381, -13.47, -8.286, -5.826, 0.778, -6.667, -7.357, 4.368, 8.529, -7.784, -3.882, -2.057, -8.383, -5.131, -11.182, -0.474, -3.926], &[8.497, 4.741, -2.287, 4.94, 11.319, 4.611, 8.364, 0.398, 8.162, 0.444, 6.582], -4.8758910610844435, 23.10260551667817, 6.275037573186074e-05),
    (&[7.75, 5.909, 16.318, 12.861, 12.318, 10.736, 17.743, 13.252, 4.013, 10.198, 10.765, 2.435, 5.599, 13.492, 8.989, 14.519, 8.534, 5.634, 19.539, 12.711, 9.462, 14.301, 10.153, 7.598, 12.819, 11.361, 8.009, 10.9, 8.365, 16.567, 12.667], &[4.364, 13.33, 7.318, 11.472, 10.894, 15.062, 8.248, 7.246, 7.293, 6.22, 10.089, 10.539, 11.198, -3.909, 5.351, 5.858, 5.077, 11.918, 6.025, 4.882, 8.927, 6.173, 7.865, 5.357, 4.842, 10.109, 7.766, 5.586, 7.373, 8.354, 3.127, 8.752, 9.776, 5.709, 8.681, 0.997], 3.6416239718044245, 60.16453287566513, 0.0005652963480549665),
    (&[1.403, -3.473, -3.215, -14.774, -12.096, -5.903, -4.702, 1.487, -4.198, 1.604, -10.749, 6.455, -7.124, -9.296, -10.327, -12.686, -2.354, -7.559], &[6.713, 13.487, 7.734, 9.643, 7.582, 13.675, 7.275, 7.766, 4.857, 9.917, 9.567, 13.518, 13.457, 16.548, 10.643, 10.748, 8.189, 10.093, 6.509, 8.384, 8.987, 11.252], -10.231988427835281, 23.878224572880672, 3.311660778038254e-10),
    (&[5.66, 4.987, 5.028, -1.159], &[13.461, 13.213, 8.397, 14.33, 14.563, 5.767, 15.264, 10.799, 13.262, 12.721, 10.491, 4.853, 12.765, 10.091, 11.392, 18.765, 6.296, 10.074, 15.655], -4.470988730205595, 4.746504181953604, 0.007436667277332266),
    (&[1.808, 12.626, 5.619, 6.304, 13.696, 13.789, 6.408, 4.309, 7.16, 9.821, 4.959, 8.509, 7.265], &[-5.593, -5.317, -3.918, -0.551, -0.927, -2.756, -1.051, -5.167, -3.655, -0.913, 0.908, -3.503, -2.373], 8.974660959385265, 18.812504361068196, 3.172375883800617e-08),
    (&[-0.855, -1.605, -1.262, -0.812, -0.521, -1.718, -1.309], &[11.091, 10.91, 11.074, 11.385, 11.383, 10.88, 10.966, 11.18, 10.908, 10.873], -68.76627498838958, 7.686360847171845, 5.294390062348505e-12),
    (&[11.001, 11.468, 13.024, 18.511, 18.08, 14.434, 14.588, 15.319, 13.259, 12.528, 17.49, 9.377, 16.856, 10.813, 8.532, 15.426, 10.994, 5.994, 14.557, 14.523, 13.119, 15.701, 10.194, 13.668, 17.213, 13.779, 13.095, 11.312, 12.929, 14.047, 11.165], &[2.96, 3.341, 3.077, 3.481, 2.862, 3.334, 2.931, 2.451, 2.286, 1.964, 4.032, 2.075, 2.21, 2.188, 3.161, 3.473, 3.02, 3.97, 3.031], 19.424985197975307, 34.27059703449757, 4.473229166981729e-20),
    (&[10.024, 11.643, 8.676, 9.836, 10.582, 10.497, 9.969, 7.894, 11.498, 9.785, 16.449, 7.177, 12.879, 12.272, 11.995, 9.047, 9.513, 10.043, 9.123, 9.696, 8.676, 8.705, 12.332, 5.636, 11.01, 11.076, 14.641, 8.226, 8.384, 12.933, 10.9], &[0.584, 4.177, -1.084, 3.7, 7.776, -0.227, 0.683, -4.234, 8.828, 2.273, 4.543, -1.325, 5.129, -2.47, -0.678, 1.008, 12.329, -1.935, 6.345, -0.502, 2.512, 0.164, -0.64, 9.694, 2.912, 5.975, 7.177, 3.259, -0.768, 4.161, -0.832, 1.646, 8.132, 7.158, 0.776, -0.807], 10.086711257365836, 56.214213169503935, 3.2003545907951394e-14),
    (&[9.723, 17.1, 15.903, 15.571, 12.897, 19.918, 11.746, 18.774, 15.04, 17.061, 15.577, 11.719, 16.391, 14.404, 13.097, 14.562, 14.723, 13.488, 11.911, 13.022, 17.876, 9.823, 14.348, 14.973, 15.273], &[9.289, 12.402, 4.044, 16.95, 10.609, 4.274, 5.653, 13.852, 17.379, 12.623, 9.973, 8.071, 7.815, 6.001, 10.751, 17.916, 11.773, 8.823, 8.796, 15.026, 13.953, 20.824, 20.256, 8.255, 15.115, 7.525, 11.109, 12.757, 9.623, 9.076, 14.487, 20.517, 13.812, 17.183, 9.476, 14.138, 17.834, 16.975, 13.847], 2.643613427164321, 61.342357240632985, 0.010399134141022752),
    (&[4.321, 13.745, 5.032, 12.172, 0.794, 6.121, 9.709, 15.004, 11.306, 8.319, 13.049, 12.58, 9.752, 10.752, 12.42, 7.077, 11.249, 12.062, 12.006, 13.537, 11.539, 17.404, 9.164, 9.78, 9.856, 5.936, 9.497, 6.641, 10.408, 7.057, 7.174, 11.484], &[3.904, 2.984, 7.659, 3.221, 12.363, 4.581, 9.326, 12.899, 7.828, 4.975, 3.461, 5.198, 3.519, 3.553, 7.592, 9.924, 11.815, 5.546, 5.544, 7.423, 9.524, 4.923, 8.761, 7.17, 11.211, 3.903, 16.166, 4.654, 0.066, 10.637, 12.694, 6.389], 3.0782812085158113, 61.67386907355652, 0.0031054534360580306),
    (&[-0.467, -5.384, -9.756, -5.285, -3.986, -0.391, 0.015, -8.134, -3.229, -3.201, -1.93, -0.125, -2.344, -1.108, -9.371, 3.165, 2.986, -1.754, 0.798, -3.578, -4.043, -8.171, -7.763, -1.374], &[8.435, 3.507, 5.404, 9.554, 4.202, 5.413, 5.088, 7.453, 9.855, 1.853, 2.264, 2.336, 4.308, 2.821, 6.925, 5.606, 3.478, 4.806, 4.792, 2.764, 4.129, -0.816, 4.512, 1.836, 4.74, 7.465, 5.343, 2.949, 4.095, 2.325, -0.852, 4.496, 5.582], -8.80934646218927, 37.93403162754067, 1.0387297436836826e-10),
    (&[-0.127, -0.704, -2.191, 2.026, 3.518, 3.099, -0.497, 3.788, -2.438, -1.085, -1.685, 2.511, -1.489, 1.363, -1.064, 0.345, 3.018, -1.869, 6.892, 0.388, 0.212, 2.374, 0.203, 2.863, 1.135, -0.209, 1.186, -0.603, 1.95, 0.526], &[6.394, 0.34, -5.297, -6.685, 0.167, -6.857, -2.43, -10.855, -5.218, -5.797, -10.989, -0.632, -12.237, -6.812, 3.127, -2.852, -16.74, -3.25, -5.96, -5.405, -14.504, -2.743, -19.968, -2.006], 4.939924634377155, 27.382204606142754, 3.4552687551930744e-05),
];
