/** Lie-group transform calls: SO3/SE3/SIM3 exp/log, composition, point action. */

import type { Bridge } from "./bridge.js";
import { asRows, asVector, type Matrix, type Quat, type Se3, type Sim3, type Vec3 } from "./matrix.js";

export class TransformApi {
  constructor(private bridge: Bridge) {}

  async so3Exp(phi: Vec3 | number[]): Promise<Quat> {
    const r = await this.bridge.call<{ q: Quat }>("so3_exp", {
      phi: asVector(phi, 3, "phi"),
    });
    return r.q;
  }

  async so3Log(q: Quat | number[]): Promise<Vec3> {
    const r = await this.bridge.call<{ phi: Vec3 }>("so3_log", {
      q: asVector(q, 4, "q"),
    });
    return r.phi;
  }

  async so3Mul(a: Quat | number[], b: Quat | number[]): Promise<Quat> {
    const r = await this.bridge.call<{ q: Quat }>("so3_mul", {
      a: asVector(a, 4, "a"),
      b: asVector(b, 4, "b"),
    });
    return r.q;
  }

  async so3Act(q: Quat | number[], points: Matrix): Promise<number[][]> {
    const r = await this.bridge.call<{ points: number[][] }>("so3_act", {
      q: asVector(q, 4, "q"),
      points: asRows(points, 3, "points"),
    });
    return r.points;
  }

  async se3Exp(xi: number[]): Promise<Se3> {
    const r = await this.bridge.call<{ g: Se3 }>("se3_exp", {
      xi: asVector(xi, 6, "xi"),
    });
    return r.g;
  }

  async se3Log(g: Se3): Promise<number[]> {
    const r = await this.bridge.call<{ xi: number[] }>("se3_log", {
      g: asVector(g, 7, "g"),
    });
    return r.xi;
  }

  async se3Mul(a: Se3, b: Se3): Promise<Se3> {
    const r = await this.bridge.call<{ g: Se3 }>("se3_mul", {
      a: asVector(a, 7, "a"),
      b: asVector(b, 7, "b"),
    });
    return r.g;
  }

  async se3Inverse(g: Se3): Promise<Se3> {
    const r = await this.bridge.call<{ g: Se3 }>("se3_inverse", {
      g: asVector(g, 7, "g"),
    });
    return r.g;
  }

  async se3Act(g: Se3, points: Matrix): Promise<number[][]> {
    const r = await this.bridge.call<{ points: number[][] }>("se3_act", {
      g: asVector(g, 7, "g"),
      points: asRows(points, 3, "points"),
    });
    return r.points;
  }

  async sim3Exp(xi: number[]): Promise<Sim3> {
    const r = await this.bridge.call<{ g: Sim3 }>("sim3_exp", {
      xi: asVector(xi, 7, "xi"),
    });
    return r.g;
  }

  async sim3Log(g: Sim3): Promise<number[]> {
    const r = await this.bridge.call<{ xi: number[] }>("sim3_log", {
      g: asVector(g, 8, "g"),
    });
    return r.xi;
  }

  async sim3Mul(a: Sim3, b: Sim3): Promise<Sim3> {
    const r = await this.bridge.call<{ g: Sim3 }>("sim3_mul", {
      a: asVector(a, 8, "a"),
      b: asVector(b, 8, "b"),
    });
    return r.g;
  }

  async sim3Inverse(g: Sim3): Promise<Sim3> {
    const r = await this.bridge.call<{ g: Sim3 }>("sim3_inverse", {
      g: asVector(g, 8, "g"),
    });
    return r.g;
  }

  async sim3Act(g: Sim3, points: Matrix): Promise<number[][]> {
    const r = await this.bridge.call<{ points: number[][] }>("sim3_act", {
      g: asVector(g, 8, "g"),
      points: asRows(points, 3, "points"),
    });
    return r.points;
  }
}
