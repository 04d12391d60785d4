//! Published phase-1 and phase-2 results of a directory-server tuning study.

/// Coded levels (TNE, MaxLDAP, LDAPnum, DispNum), four normalized throughputs,
/// and the printed signal-to-noise ratio.
pub const PHASE1_ROWS: [([u8; 4], [f64; 4], f64); 27] = [
    ([1, 1, 1, 1], [1.04179, 1.04286, 1.03887, 1.04011], 0.3482),
    ([1, 1, 2, 2], [1.03664, 1.04058, 1.03610, 1.03802], 0.32251),
    ([1, 1, 3, 3], [1.04010, 1.04090, 1.03611, 1.04088], 0.33642),
    ([1, 2, 1, 1], [1.01618, 1.01351, 1.00902, 1.01522], 0.11621),
    ([1, 2, 2, 2], [0.87137, 0.87319, 0.87380, 0.87376], -1.17944),
    ([1, 2, 3, 3], [0.99704, 1.00065, 1.00056, 1.00127], -0.00108),
    ([1, 3, 1, 1], [0.98439, 0.98155, 0.98125, 0.98179], -0.15563),
    ([1, 3, 2, 2], [0.82424, 0.82573, 0.82606, 0.82351], -1.67214),
    ([1, 3, 3, 3], [0.93522, 0.94136, 0.93701, 0.93796], -0.55705),
    ([2, 1, 1, 2], [1.04869, 1.04978, 1.05120, 1.05066], 0.42448),
    ([2, 1, 2, 3], [1.05589, 1.05607, 1.05547, 1.05524], 0.47054),
    ([2, 1, 3, 1], [1.05621, 1.05371, 1.05361, 1.05452], 0.461),
    ([2, 2, 1, 2], [1.02139, 1.02600, 1.02556, 1.02599], 0.2122),
    ([2, 2, 2, 3], [1.02035, 1.01656, 1.01214, 1.01762], 0.14346),
    ([2, 2, 3, 1], [1.01656, 1.01357, 1.01418, 1.01461], 0.12699),
    ([2, 3, 1, 2], [0.99739, 0.99871, 0.99468, 0.99634], -0.02804),
    ([2, 3, 2, 3], [0.98185, 0.98176, 0.98165, 0.98112], -0.16137),
    ([2, 3, 3, 1], [0.94995, 0.94706, 0.95160, 0.94836], -0.4525),
    ([3, 1, 1, 3], [1.06305, 1.06361, 1.06563, 1.06227], 0.5359),
    ([3, 1, 2, 1], [1.06139, 1.06127, 1.05931, 1.06508], 0.52049),
    ([3, 1, 3, 2], [1.05289, 1.05763, 1.06576, 1.01239], 0.39515),
    ([3, 2, 1, 3], [1.03708, 1.03372, 1.03558, 1.03254], 0.29651),
    ([3, 2, 2, 1], [1.02495, 1.02683, 1.01093, 1.02186], 0.18125),
    ([3, 2, 3, 2], [0.90870, 0.91028, 0.90458, 0.90881], -0.83747),
    ([3, 3, 1, 3], [0.99866, 1.00509, 1.00254, 1.00110], 0.01594),
    ([3, 3, 2, 1], [0.99073, 0.99282, 0.99061, 0.98954], -0.0792),
    ([3, 3, 3, 2], [0.81118, 0.81172, 0.81286, 0.80691], -1.82325),
];

/// Uncoded (TNE, MaxLDAP, DispNum) with LDAPnum pinned at 1; centre, star and
/// corner rows in that order.
pub const PHASE2_ROWS: [([i64; 3], [f64; 4], f64); 20] = [
    ([32930, 100, 5], [1.05695, 1.05256, 1.05524, 1.05311], 0.46061),
    ([32930, 100, 5], [1.05485, 1.05372, 1.05452, 1.05349], 0.45800),
    ([32930, 100, 5], [1.05566, 1.05424, 1.05576, 1.05377], 0.46387),
    ([32930, 100, 5], [1.05681, 1.05236, 1.05167, 1.05186], 0.44996),
    ([32930, 100, 5], [1.05689, 1.05043, 1.05209, 1.05568], 0.45486),
    ([32930, 100, 5], [1.05541, 1.05572, 1.05274, 1.05130], 0.45506),
    ([24520, 100, 5], [1.05126, 1.05088, 1.04638, 1.05032], 0.42134),
    ([41340, 100, 5], [1.05871, 1.06006, 1.05310, 1.06057], 0.49051),
    ([32930, 24, 5], [1.05263, 1.04366, 1.05009, 1.05295], 0.42224),
    ([32930, 176, 5], [1.05060, 1.01334, 1.05227, 1.05818], 0.36682),
    ([32930, 100, 3], [1.05782, 1.05400, 1.05609, 1.05252], 0.46589),
    ([32930, 100, 7], [1.05255, 1.04737, 1.05396, 1.05339], 0.43873),
    ([27930, 55, 4], [1.04988, 1.05230, 1.05233, 1.05312], 0.43953),
    ([37930, 55, 4], [1.05887, 1.05642, 1.05505, 1.05749], 0.48113),
    ([27930, 145, 4], [1.05717, 1.05131, 1.04751, 1.04899], 0.43392),
    ([37930, 145, 4], [1.04215, 1.05588, 1.05928, 1.05687], 0.45253),
    ([27930, 55, 6], [1.04830, 1.05021, 1.05177, 1.05052], 0.42542),
    ([37930, 55, 6], [1.05852, 1.05211, 1.05801, 1.05625], 0.47503),
    ([27930, 145, 6], [1.05465, 1.05288, 1.05365, 1.05581], 0.45884),
    ([37930, 145, 6], [1.05493, 1.05221, 1.05589, 1.05815], 0.46742),
];
