"""Straight-line numpy re-implementations used as independent test oracles.

Everything here works on one sample at a time with explicit loops over
attributes and time steps, shares no code with the package beyond reading
parameter arrays by name, and uses the unshifted softmax.
"""
import numpy as np


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def softmax(z):
    e = np.exp(z)
    return e / e.sum()


def lstm(x, h, s, Wx, Wh, b):
    H = h.shape[0]
    z = Wx @ x + Wh @ h + b
    i = sigmoid(z[:H])
    f = sigmoid(z[H:2 * H])
    o = sigmoid(z[2 * H:3 * H])
    g = np.tanh(z[3 * H:])
    s_new = f * s + i * g
    return o * np.tanh(s_new), s_new


def gru(x, h, Wx, Wh, b):
    H = h.shape[0]
    u = sigmoid(Wx[:H] @ x + Wh[:H] @ h + b[:H])
    r = sigmoid(Wx[H:2 * H] @ x + Wh[H:2 * H] @ h + b[H:2 * H])
    cand = np.tanh(Wx[2 * H:] @ x + Wh[2 * H:] @ (r * h) + b[2 * H:])
    return u * h + (1.0 - u) * cand


def spatial_score(P, prefix, h, s, driver):
    v, W, U, b = (P[f"{prefix}.{k}"] for k in "vWUb")
    return v @ np.tanh(W @ np.concatenate([h, s]) + U @ driver + b)


def spatial_step(P, prefix, values, drivers, t, h, s):
    """One spatial attention step on a single sample: values [rows, T], drivers [rows, L]."""
    rows = values.shape[0]
    scores = np.array([spatial_score(P, prefix, h, s, drivers[k]) for k in range(rows)])
    alpha = softmax(scores)
    weighted = np.array([alpha[k] * values[k, t] for k in range(rows)])
    h, s = lstm(weighted, h, s, P[f"{prefix}.lstm.W_x"], P[f"{prefix}.lstm.W_h"], P[f"{prefix}.lstm.b"])
    return weighted, alpha, h, s


def spatial_encoder(P, prefix, values, drivers=None):
    drivers = values if drivers is None else drivers
    rows, T = values.shape
    H = P[f"{prefix}.lstm.W_h"].shape[1]
    h, s = np.zeros(H), np.zeros(H)
    weighted = np.zeros((rows, T))
    states, alphas = [], []
    for t in range(T):
        weighted[:, t], a, h, s = spatial_step(P, prefix, values, drivers, t, h, s)
        states.append(h)
        alphas.append(a)
    return weighted, np.array(states), np.array(alphas)


def temporal(P, states, d, sd):
    v, W, U, b = (P[f"temporal.{k}"] for k in "vWUb")
    T = states.shape[0]
    scores = np.array([v @ np.tanh(W @ np.concatenate([d, sd]) + U @ states[i] + b) for i in range(T)])
    gamma = softmax(scores)
    context = sum(gamma[j] * states[j] for j in range(T))
    return context, gamma


def decoder(P, Y, states=None, fixed=None):
    T = Y.shape[0]
    p = P["decoder.lstm.W_h"].shape[1]
    d, sd = np.zeros(p), np.zeros(p)
    context = fixed
    for t in range(T):
        if states is not None:
            context, _ = temporal(P, states, d, sd)
        y_tilde = P["decoder.w"] @ np.concatenate([[Y[t]], context]) + P["decoder.b"]
        d, sd = lstm(y_tilde, d, sd, P["decoder.lstm.W_x"], P["decoder.lstm.W_h"], P["decoder.lstm.b"])
    hidden = P["head.W_y"] @ np.concatenate([d, context]) + P["head.b_y"]
    return P["head.v_y"] @ hidden + P["head.b_out"]


def model_forward(arch, P, X, Y, target_row=True):
    """Single-sample forward for the attention architectures."""
    n, T = X.shape
    if arch == "darnn":
        _, states, _ = spatial_encoder(P, "phase1", X)
        return decoder(P, Y, states=states)
    if arch == "input-attn":
        _, states, _ = spatial_encoder(P, "phase1", X)
        return decoder(P, Y, fixed=states[-1])
    xw, _, _ = spatial_encoder(P, "phase1", X)
    rows = [xw]
    if arch == "dstp2":
        drivers = np.array([np.concatenate([X[k], Y]) for k in range(n)])
        xw2, _, _ = spatial_encoder(P, "phase1_2", X, drivers)
        rows.append(xw2)
    if target_row:
        rows.append(Y[None, :])
    Z = np.vstack(rows)
    zw, states, _ = spatial_encoder(P, "phase2", Z)
    if arch == "deepattn":
        _, states, _ = spatial_encoder(P, "phase3", zw)
    return decoder(P, Y, states=states)


def central_difference(f, arr, h=1e-5):
    """Gradient of scalar ``f()`` w.r.t. every entry of ``arr`` (modified in place and restored)."""
    grad = np.zeros_like(arr)
    for idx in np.ndindex(arr.shape):
        old = arr[idx]
        arr[idx] = old + h
        up = f()
        arr[idx] = old - h
        down = f()
        arr[idx] = old
        grad[idx] = (up - down) / (2 * h)
    return grad


def relative_errors(analytic, numeric, floor=1e-8):
    """Elementwise |a-n| / max(|a|, |n|), with entries whose absolute error is within ``floor`` set to 0."""
    diff = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    err = np.where(diff <= floor, 0.0, diff / np.where(scale > 0, scale, 1.0))
    return err


def tiny_instance(seed=2019, batch=2, n=3, T=4, horizon=2):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(batch, n, T)), rng.normal(size=(batch, T)), rng.normal(size=(batch, horizon))


def model_gradient_errors(config, params, X, Y, F, h=1e-5, floor=1e-8):
    """Per-parameter (max relative error, max absolute error) of tape gradients against central differences."""
    from dstp.models import forward
    from dstp.training import loss_and_grads

    loss_and_grads(config, params, X, Y, F)
    analytic = {k: v.copy() for k, v in params.grads.items()}

    def loss():
        pred = forward(config, params, X, Y).prediction
        return float(((pred - F) ** 2).sum() / len(X))

    errors = {}
    for name in params.names():
        numeric = central_difference(loss, params.values[name], h)
        errors[name] = (float(relative_errors(analytic[name], numeric, floor).max()),
                        float(np.abs(analytic[name] - numeric).max()))
    return errors


SML2010_COLUMNS = [
    "Date", "Time", "Temperature_Comedor_Sensor", "Temperature_Habitacion_Sensor", "Weather_Temperature",
    "CO2_Comedor_Sensor", "CO2_Habitacion_Sensor", "Humedad_Comedor_Sensor", "Humedad_Habitacion_Sensor",
    "Lighting_Comedor_Sensor", "Lighting_Habitacion_Sensor", "Precipitacion", "Meteo_Exterior_Crepusculo",
    "Meteo_Exterior_Viento", "Meteo_Exterior_Sol_Oest", "Meteo_Exterior_Sol_Est", "Meteo_Exterior_Sol_Sud",
    "Meteo_Exterior_Piranometro", "Exterior_Entalpic_1", "Exterior_Entalpic_2", "Exterior_Entalpic_turbo",
    "Temperature_Exterior_Sensor", "Humedad_Exterior_Sensor", "Day_Of_Week",
]


def write_sml2010_like(path, rows=2763, seed=0):
    """Write a file in the raw SML2010 layout: '#'-prefixed numbered header, whitespace separated."""
    rng = np.random.default_rng(seed)
    t = np.arange(rows)
    lines = ["# " + " ".join(f"{i + 1}:{name}" for i, name in enumerate(SML2010_COLUMNS))]
    base = np.sin(2 * np.pi * t / 96)
    for i in t:
        day, minute = divmod(int(i) * 15, 24 * 60)
        fields = [f"{13 + day % 28:02d}/03/2012", f"{minute // 60:02d}:{minute % 60:02d}"]
        for k in range(2, 24):
            if k in (18, 19, 20):
                fields.append(str(int(rng.random() < 0.3)))
            else:
                fields.append(f"{20 + (k % 5) * base[i] + 0.3 * k + rng.normal(scale=0.2):.4f}")
        lines.append(" ".join(fields))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
