/* Build: cc -Icrates/ffi/include reconstruct.c -Ltarget/release -lcassi_gsm_ffi */
#include <stdio.h>

#include "cassi_gsm.h"

static int check(CassiStatus s, const char *what) {
    if (s != CASSI_STATUS_OK) {
        fprintf(stderr, "%s failed (%d): %s\n", what, (int)s, cassi_last_error());
        return 1;
    }
    return 0;
}

int main(void) {
    CassiCube *truth = NULL, *x = NULL;
    CassiMask *mask = NULL;
    CassiMeasurement *y = NULL;
    double psnr = 0.0;
    int rc = 1;

    if (check(cassi_scene_generate(48, 48, 8, 12, 7, &truth), "scene")) goto done;
    if (check(cassi_mask_random_binary(48, 48, 0.5, 11, &mask), "mask")) goto done;
    if (check(cassi_simulate(truth, mask, 2, &y), "simulate")) goto done;

    CassiSolverOptions opts = cassi_solver_options_default();
    if (check(cassi_reconstruct(y, mask, &opts, &x), "reconstruct")) goto done;
    if (check(cassi_psnr(truth, x, 1.0, &psnr), "psnr")) goto done;
    printf("PSNR %.2f dB\n", psnr);
    rc = 0;

done:
    cassi_cube_free(truth);
    cassi_cube_free(x);
    cassi_mask_free(mask);
    cassi_measurement_free(y);
    return rc;
}
