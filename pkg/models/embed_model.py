# models/embed_model.py

import hashlib
import logging
from dataclasses import dataclass

import numpy as np

from autodiff_modules import GruParams, Value, concat, constant, conv1d, dense, grl, gru_sequence, mean_pool_time
from corpus_modules.corpus_batching import collate
from errors import DegenerateInputError, SpecError
from models.sample import ACOUSTIC_DIM, EMOTION_CLASSES, GENDERS, LEXICAL_DIM
from utils.rng import glorot_uniform, make_rng

logger = logging.getLogger(__name__)

EMBED_PREFIX = 'embed/'


class ModelParams:
    """Named parameter tensors of one model plus the ModelSpec that wires them.

    Names are prefixed by group: 'embed/' for the embedding sub-network,
    'emotion/' for the emotion head and 'adv{i}_{target}/' for adversary i.
    """

    def __init__(self, spec, tensors, speaker_classes=()):
        self.spec = spec
        self.tensors = dict(tensors)
        self.speaker_classes = tuple(int(s) for s in speaker_classes)

    def __getitem__(self, name):
        return self.tensors[name]

    def __contains__(self, name):
        return name in self.tensors

    def names(self):
        return list(self.tensors)

    def values(self):
        return list(self.tensors.values())

    def group(self, prefix):
        return [v for name, v in self.tensors.items() if name.startswith(prefix)]

    def embedding_values(self):
        return self.group(EMBED_PREFIX)

    def head_names(self):
        return self.spec.head_names()

    def head_size(self, head):
        if head == 'emotion':
            return len(EMOTION_CLASSES)
        index = self.adversary_index(head)
        target = self.spec.adversaries[index].target
        return len(GENDERS) if target == 'gender' else len(self.speaker_classes)

    def adversary_index(self, head):
        heads = self.head_names()
        if head not in heads or head == 'emotion':
            raise SpecError(f"Unknown adversary head '{head}'; model has {list(heads)}")
        return heads.index(head) - 1

    def resolve_head(self, head):
        """Accept 'emotion', 'adv0_gender' or the positional 'adversary_0'"""
        if isinstance(head, str) and head.startswith('adversary_'):
            try:
                index = int(head.split('_', 1)[1])
            except ValueError:
                raise SpecError(f"Unknown head '{head}'")
            if not 0 <= index < len(self.spec.adversaries):
                raise SpecError(f"Unknown head '{head}'; model has {len(self.spec.adversaries)} adversaries")
            return self.head_names()[index + 1]
        if head not in self.head_names():
            raise SpecError(f"Unknown head '{head}'; model has {list(self.head_names())}")
        return head

    def parameter_count(self):
        return int(sum(v.data.size for v in self.tensors.values()))

    def snapshot(self):
        return {name: v.data.copy() for name, v in self.tensors.items()}

    def restore(self, snapshot):
        for name, data in snapshot.items():
            self.tensors[name].data = data.copy()

    def copy(self):
        tensors = {name: Value(v.data.copy(), name=name) for name, v in self.tensors.items()}
        return ModelParams(self.spec, tensors, self.speaker_classes)

    def checksum(self, prefix=''):
        """sha256 over names and raw bytes of every tensor under prefix"""
        digest = hashlib.sha256()
        for name in sorted(self.tensors):
            if name.startswith(prefix):
                digest.update(name.encode('utf-8'))
                digest.update(np.ascontiguousarray(self.tensors[name].data).tobytes())
        return digest.hexdigest()

    def to_dict(self):
        return {
            'spec': self.spec.to_dict(),
            'speaker_classes': list(self.speaker_classes),
            'parameter_count': self.parameter_count(),
        }


@dataclass
class ForwardPass:
    representation: Value
    streams: dict
    logits: dict


def _dense_layer(tensors, rng, prefix, n_in, n_out):
    tensors[f'{prefix}/W'] = Value(glorot_uniform(rng, (n_out, n_in), n_in, n_out), name=f'{prefix}/W')
    tensors[f'{prefix}/b'] = Value(np.zeros(n_out), name=f'{prefix}/b')


def _gru_stack(tensors, rng, prefix, input_dim, spec):
    for i in range(spec.gru_layers):
        gru = GruParams.create(rng, input_dim if i == 0 else spec.gru_width, spec.gru_width,
                               prefix=f'{prefix}/gru{i}')
        for value in gru.values():
            tensors[value.name] = value


def _head_layers(tensors, rng, head, n_in, n_out, spec):
    for i in range(spec.dense_layers):
        _dense_layer(tensors, rng, f'{head}/dense{i}', n_in if i == 0 else spec.dense_width, spec.dense_width)
    _dense_layer(tensors, rng, f'{head}/out', spec.dense_width, n_out)


def build_model(spec, seed, speakers=()):
    """Initialise every parameter group from its own PRNG stream.

    speakers lists the training speaker ids a speaker adversary classifies.
    """
    spec.validate()
    speakers = tuple(sorted(int(s) for s in speakers))
    if any(a.target == 'speaker' for a in spec.adversaries) and len(speakers) < 2:
        raise SpecError("A speaker adversary needs at least 2 training speakers")

    tensors = {}
    if spec.uses_acoustic:
        rng = make_rng(seed, 'init', 'embed', 'acoustic')
        channels = ACOUSTIC_DIM
        for i in range(spec.conv_layers):
            prefix = f'embed/acoustic/conv{i}'
            fan_in, fan_out = spec.conv_width * channels, spec.conv_width * spec.conv_kernels
            tensors[f'{prefix}/kernels'] = Value(
                glorot_uniform(rng, (spec.conv_kernels, spec.conv_width, channels), fan_in, fan_out),
                name=f'{prefix}/kernels')
            tensors[f'{prefix}/bias'] = Value(np.zeros(spec.conv_kernels), name=f'{prefix}/bias')
            channels = spec.conv_kernels
        _gru_stack(tensors, rng, 'embed/acoustic', channels, spec)
    if spec.uses_lexical:
        _gru_stack(tensors, make_rng(seed, 'init', 'embed', 'lexical'), 'embed/lexical', LEXICAL_DIM, spec)

    _head_layers(tensors, make_rng(seed, 'init', 'emotion'), 'emotion',
                 spec.representation_dim, len(EMOTION_CLASSES), spec)
    for index, adversary in enumerate(spec.adversaries):
        head = f'adv{index}_{adversary.target}'
        n_out = len(GENDERS) if adversary.target == 'gender' else len(speakers)
        _head_layers(tensors, make_rng(seed, 'init', 'adv', index, adversary.target), head,
                     spec.representation_dim, n_out, spec)

    params = ModelParams(spec, tensors, speakers)
    logger.debug(f"[TRAINER] Built {spec.modality}/{spec.task}/{spec.mode} model with "
                 f"{params.parameter_count()} parameters")
    return params


def _gru(params, prefix, index):
    return GruParams(**{field: params[f'{prefix}/gru{index}/{field}'] for field in GruParams.FIELDS})


def _acoustic_stream(params, batch):
    spec = params.spec
    lengths = np.asarray(batch.acoustic_lengths, dtype=np.int64)
    if np.any(lengths < spec.receptive_field):
        raise DegenerateInputError(f"Acoustic sequence of {int(lengths.min())} frames is shorter than "
                                   f"the receptive field of {spec.receptive_field}")
    x = constant(batch.acoustic)
    for i in range(spec.conv_layers):
        x = conv1d(x, params[f'embed/acoustic/conv{i}/kernels'], spec.conv_width,
                   params[f'embed/acoustic/conv{i}/bias'])
        lengths = lengths - spec.conv_width + 1
    for i in range(spec.gru_layers):
        x = gru_sequence(x, _gru(params, 'embed/acoustic', i))
    return mean_pool_time(x, lengths)


def _lexical_stream(params, batch):
    x = constant(batch.lexical)
    for i in range(params.spec.gru_layers):
        x = gru_sequence(x, _gru(params, 'embed/lexical', i))
    return mean_pool_time(x, batch.lexical_lengths)


def represent(params, batch):
    """Fixed-length representation h of a batch plus the per-stream h_a / h_l"""
    spec = params.spec
    streams = {}
    if spec.uses_acoustic:
        streams['acoustic'] = _acoustic_stream(params, batch)
    if spec.uses_lexical:
        streams['lexical'] = _lexical_stream(params, batch)
    if spec.modality == 'multimodal':
        representation = concat([streams['acoustic'], streams['lexical']])
    else:
        representation = streams[spec.modality]
    return representation, streams


def _head(params, head, h):
    for i in range(params.spec.dense_layers):
        h = dense(h, params[f'{head}/dense{i}/W'], params[f'{head}/dense{i}/b'], 'relu')
    return dense(h, params[f'{head}/out/W'], params[f'{head}/out/b'], 'identity')


def _adversary_input(params, index, representation, streams):
    lam, lam_lexical = params.spec.effective_lambdas(index)
    if params.spec.grl_placement == 'per-stream':
        return concat([grl(streams['acoustic'], lam), grl(streams['lexical'], lam_lexical)])
    return grl(representation, lam)


def forward(params, batch, heads=None):
    """Full forward pass; the emotion head reads h directly, adversaries read it through GRL"""
    heads = params.head_names() if heads is None else [params.resolve_head(h) for h in heads]
    representation, streams = represent(params, batch)
    logits = {}
    for head in heads:
        if head == 'emotion':
            logits[head] = _head(params, head, representation)
        else:
            index = params.adversary_index(head)
            logits[head] = _head(params, head, _adversary_input(params, index, representation, streams))
    return ForwardPass(representation=representation, streams=streams, logits=logits)


def softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _chunks(samples, batch_size):
    for start in range(0, len(samples), batch_size):
        yield samples[start:start + batch_size]


def embed_batch(params, samples, batch_size=64):
    """(N, representation_dim) array of representations; no graph is kept"""
    if not samples:
        return np.zeros((0, params.spec.representation_dim))
    rows = [represent(params, collate(chunk, params.spec.task))[0].data
            for chunk in _chunks(list(samples), batch_size)]
    return np.vstack(rows)


def embed(params, sample):
    return embed_batch(params, [sample])[0]


def predict_batch(params, samples, head='emotion', batch_size=64):
    """(N, K) softmax probabilities of one head"""
    head = params.resolve_head(head)
    rows = [softmax(forward(params, collate(chunk, params.spec.task), heads=[head]).logits[head].data)
            for chunk in _chunks(list(samples), batch_size)]
    return np.vstack(rows)


def predict(params, sample, head='emotion'):
    return predict_batch(params, [sample], head)[0]
