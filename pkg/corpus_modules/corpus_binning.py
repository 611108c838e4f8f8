# corpus_modules/corpus_binning.py

from corpus_modules.corpus_config import RATING_SCALES
from errors import DomainError


def bin_rating(mean_rating, scale):
    """Bin a mean Likert rating into low / mid / high.

    Intervals are closed on the upper edge: low [min, a], mid (a, b], high (b, max].
    """
    if scale not in RATING_SCALES:
        raise DomainError(f"Unknown rating scale: {scale}")
    edges = RATING_SCALES[scale]
    rating = float(mean_rating)
    if not edges['min'] <= rating <= edges['max']:
        raise DomainError(f"Rating {rating} outside the {scale} range "
                          f"[{edges['min']}, {edges['max']}]")
    if rating <= edges['low_max']:
        return 'low'
    if rating <= edges['mid_max']:
        return 'mid'
    return 'high'


def latent_rating_params(scale):
    """Centre and spread of the latent rating so each class gets about a third.

    The mid band (a, b] is centred on (a + b) / 2; with spread
    (b - a) / 2 / 0.4307 a normal rating lands in it with probability 1/3.
    """
    edges = RATING_SCALES[scale]
    center = 0.5 * (edges['low_max'] + edges['mid_max'])
    spread = 0.5 * (edges['mid_max'] - edges['low_max']) / 0.4307
    return center, spread
