/**
 * Built-in world documents, held as their exact canonical JSON text.
 *
 * The canonical form (sorted keys, comma/colon separators, real-valued
 * fields as floats) is what the configuration digest hashes, so hashing
 * these strings reproduces the digest a server reports in `hello`. A
 * match tells the viewer the item palette, the action space, and the
 * patch size without any side channel.
 */

export interface ItemTypeDoc {
  name: string;
  color: number[];
  scent: number[];
  blocks_movement: boolean;
  occlusion: number;
}

export interface WorldDoc {
  name: string;
  patchSize: number;
  scentDims: number;
  colorDims: number;
  visualRange: number;
  actionSpace: string[];
  items: ItemTypeDoc[];
}

const CANONICAL: Record<string, string> = {
  woodland:
    '{"agent":{"action_space":["MoveForward","TurnLeft","TurnRight"],"color":[0.0,0.0,0.0],"field_of_view":360.0,"scent":[0.0,0.0,0.0],"visual_range":8},"items":[{"blocks_movement":false,"collect_costs":{},"collect_requirements":{},"color":[0.82,0.27,0.2],"intensity":["Constant",1.5],"interactions":{"Banana":["PiecewiseBox",10.0,100.0,2.0,-100.0],"JellyBean":["PiecewiseBox",10.0,100.0,0.0,-6.0],"Wall":["PiecewiseBox",50.0,100.0,-100.0,-100.0]},"name":"JellyBean","occlusion":0.0,"scent":[1.64,0.54,0.4]},{"blocks_movement":false,"collect_costs":{},"collect_requirements":{},"color":[0.96,0.88,0.2],"intensity":["Constant",1.5],"interactions":{"Banana":["PiecewiseBox",10.0,100.0,0.0,-6.0],"JellyBean":["PiecewiseBox",10.0,100.0,2.0,-100.0],"Wall":["PiecewiseBox",50.0,100.0,-100.0,-100.0]},"name":"Banana","occlusion":0.0,"scent":[1.92,1.76,0.4]},{"blocks_movement":false,"collect_costs":{},"collect_requirements":{},"color":[0.68,0.01,0.99],"intensity":["Constant",1.5],"interactions":{},"name":"Onion","occlusion":0.0,"scent":[0.68,0.01,0.99]},{"blocks_movement":true,"collect_costs":{},"collect_requirements":{},"color":[0.2,0.47,0.67],"intensity":["Constant",-12.0],"interactions":{"Wall":["Cross",20.0,40.0,8.0,-1000.0,-1000.0,-1.0]},"name":"Wall","occlusion":0.0,"scent":[0.0,0.0,0.0]},{"blocks_movement":true,"collect_costs":{},"collect_requirements":{},"color":[0.0,0.47,0.06],"intensity":["Constant",2.0],"interactions":{"Tree":["PiecewiseBox",100.0,500.0,0.0,-0.1]},"name":"Tree","occlusion":0.0,"scent":[0.0,0.47,0.06]},{"blocks_movement":false,"collect_costs":{},"collect_requirements":{},"color":[0.42,0.24,0.13],"intensity":["Constant",0.0],"interactions":{"Tree":["PiecewiseBox",4.0,200.0,2.0,0.0],"Truffle":["PiecewiseBox",30.0,1000.0,-0.3,-1.0]},"name":"Truffle","occlusion":0.0,"scent":[8.4,4.8,2.6]}],"map":{"collision_policy":"first-come-first-serve","color_dims":3,"mh_iterations":10000,"patch_size":64,"scent_decay":0.4,"scent_diffusion":0.14,"scent_dims":3,"seed":0},"version":1}',
  meadow:
    '{"agent":{"action_space":["MoveForward","TurnLeft","TurnRight"],"color":[0.0,0.0,0.0],"field_of_view":60.0,"scent":[0.0,0.0,0.0],"visual_range":5},"items":[{"blocks_movement":false,"collect_costs":{},"collect_requirements":{},"color":[0.0,0.0,1.0],"intensity":["Constant",-5.3],"interactions":{"Banana":["PiecewiseBox",10.0,200.0,2.0,-100.0],"JellyBean":["PiecewiseBox",10.0,200.0,0.0,-6.0],"Onion":["PiecewiseBox",200.0,0.0,-100.0,-100.0]},"name":"JellyBean","occlusion":0.0,"scent":[0.0,0.0,1.0]},{"blocks_movement":false,"collect_costs":{},"collect_requirements":{},"color":[0.0,1.0,0.0],"intensity":["Constant",-5.3],"interactions":{"Banana":["PiecewiseBox",10.0,200.0,0.0,-6.0],"JellyBean":["PiecewiseBox",10.0,100.0,2.0,-100.0],"Onion":["PiecewiseBox",200.0,0.0,-6.0,-6.0]},"name":"Banana","occlusion":0.0,"scent":[0.0,1.0,0.0]},{"blocks_movement":false,"collect_costs":{},"collect_requirements":{},"color":[1.0,0.0,0.0],"intensity":["Constant",-5.0],"interactions":{"Banana":["PiecewiseBox",200.0,0.0,-6.0,-6.0],"JellyBean":["PiecewiseBox",200.0,0.0,-100.0,-100.0]},"name":"Onion","occlusion":0.0,"scent":[1.0,0.0,0.0]}],"map":{"collision_policy":"first-come-first-serve","color_dims":3,"mh_iterations":4000,"patch_size":32,"scent_decay":0.4,"scent_diffusion":0.14,"scent_dims":3,"seed":0},"version":1}',
  radial:
    '{"agent":{"action_space":["MoveForward","TurnLeft","TurnRight"],"color":[0.0,0.0,0.0],"field_of_view":360.0,"scent":[0.0,0.0,0.0],"visual_range":5},"items":[{"blocks_movement":false,"collect_costs":{},"collect_requirements":{},"color":[0.0,0.0,1.0],"intensity":["RadialHash",500.0,60.0,-3.0,14.0],"interactions":{"Banana":["PiecewiseBox",10.0,200.0,2.0,-100.0],"JellyBean":["PiecewiseBox",10.0,200.0,0.0,-6.0],"Onion":["PiecewiseBox",200.0,0.0,-100.0,-100.0]},"name":"JellyBean","occlusion":0.0,"scent":[0.0,0.0,1.0]},{"blocks_movement":false,"collect_costs":{},"collect_requirements":{},"color":[0.0,1.0,0.0],"intensity":["RadialHash",500.0,60.0,-3.0,14.0],"interactions":{"Banana":["PiecewiseBox",10.0,200.0,0.0,-6.0],"JellyBean":["PiecewiseBox",10.0,100.0,2.0,-100.0],"Onion":["PiecewiseBox",200.0,0.0,-6.0,-6.0]},"name":"Banana","occlusion":0.0,"scent":[0.0,1.0,0.0]},{"blocks_movement":false,"collect_costs":{},"collect_requirements":{},"color":[1.0,0.0,0.0],"intensity":["Constant",-5.0],"interactions":{"Banana":["PiecewiseBox",200.0,0.0,-6.0,-6.0],"JellyBean":["PiecewiseBox",200.0,0.0,-100.0,-100.0]},"name":"Onion","occlusion":0.0,"scent":[1.0,0.0,0.0]},{"blocks_movement":true,"collect_costs":{},"collect_requirements":{},"color":[0.5,0.5,0.5],"intensity":["Constant",0.0],"interactions":{"Wall":["CrossHash",60.0,4.0,25.0,2.0,20.0,-200.0,-20.0,1.0]},"name":"Wall","occlusion":0.0,"scent":[0.0,0.0,0.0]}],"map":{"collision_policy":"first-come-first-serve","color_dims":3,"mh_iterations":4000,"patch_size":32,"scent_decay":0.4,"scent_diffusion":0.14,"scent_dims":3,"seed":0},"version":1}',
  woodland_occlusion:
    '{"agent":{"action_space":["MoveForward","TurnLeft","TurnRight"],"color":[0.0,0.0,0.0],"field_of_view":360.0,"scent":[0.0,0.0,0.0],"visual_range":8},"items":[{"blocks_movement":false,"collect_costs":{},"collect_requirements":{},"color":[0.82,0.27,0.2],"intensity":["Constant",1.5],"interactions":{"Banana":["PiecewiseBox",10.0,100.0,2.0,-100.0],"JellyBean":["PiecewiseBox",10.0,100.0,0.0,-6.0],"Wall":["PiecewiseBox",50.0,100.0,-100.0,-100.0]},"name":"JellyBean","occlusion":0.0,"scent":[1.64,0.54,0.4]},{"blocks_movement":false,"collect_costs":{},"collect_requirements":{},"color":[0.96,0.88,0.2],"intensity":["Constant",1.5],"interactions":{"Banana":["PiecewiseBox",10.0,100.0,0.0,-6.0],"JellyBean":["PiecewiseBox",10.0,100.0,2.0,-100.0],"Wall":["PiecewiseBox",50.0,100.0,-100.0,-100.0]},"name":"Banana","occlusion":0.0,"scent":[1.92,1.76,0.4]},{"blocks_movement":false,"collect_costs":{},"collect_requirements":{},"color":[0.68,0.01,0.99],"intensity":["Constant",1.5],"interactions":{},"name":"Onion","occlusion":0.0,"scent":[0.68,0.01,0.99]},{"blocks_movement":true,"collect_costs":{},"collect_requirements":{},"color":[0.2,0.47,0.67],"intensity":["Constant",-12.0],"interactions":{"Wall":["Cross",20.0,40.0,8.0,-1000.0,-1000.0,-1.0]},"name":"Wall","occlusion":1.0,"scent":[0.0,0.0,0.0]},{"blocks_movement":true,"collect_costs":{},"collect_requirements":{},"color":[0.0,0.47,0.06],"intensity":["Constant",2.0],"interactions":{"Tree":["PiecewiseBox",100.0,500.0,0.0,-0.1]},"name":"Tree","occlusion":0.1,"scent":[0.0,0.47,0.06]},{"blocks_movement":false,"collect_costs":{},"collect_requirements":{},"color":[0.42,0.24,0.13],"intensity":["Constant",0.0],"interactions":{"Tree":["PiecewiseBox",4.0,200.0,2.0,0.0],"Truffle":["PiecewiseBox",30.0,1000.0,-0.3,-1.0]},"name":"Truffle","occlusion":0.0,"scent":[8.4,4.8,2.6]}],"map":{"collision_policy":"first-come-first-serve","color_dims":3,"mh_iterations":10000,"patch_size":64,"scent_decay":0.4,"scent_diffusion":0.14,"scent_dims":3,"seed":0},"version":1}',
};

export function knownWorlds(): string[] {
  return Object.keys(CANONICAL);
}

/** Exact canonical JSON text of a bundled world (what the digest hashes). */
export function canonicalText(name: string): string {
  const text = CANONICAL[name];
  if (text === undefined) throw new Error(`unknown world ${name}`);
  return text;
}

export function worldDoc(name: string): WorldDoc {
  const text = CANONICAL[name];
  if (text === undefined) throw new Error(`unknown world ${name}`);
  const raw = JSON.parse(text);
  return {
    name,
    patchSize: raw.map.patch_size,
    scentDims: raw.map.scent_dims,
    colorDims: raw.map.color_dims,
    visualRange: raw.agent.visual_range,
    actionSpace: raw.agent.action_space,
    items: raw.items.map((it: Record<string, unknown>) => ({
      name: it.name,
      color: it.color,
      scent: it.scent,
      blocks_movement: it.blocks_movement,
      occlusion: it.occlusion,
    })),
  };
}

/** SHA-256 hex of a UTF-8 string, via WebCrypto (browser and node). */
export async function sha256Hex(text: string): Promise<string> {
  const subtle = globalThis.crypto?.subtle;
  if (!subtle) throw new Error("WebCrypto unavailable (insecure context?)");
  const data = new TextEncoder().encode(text);
  const hash = await subtle.digest("SHA-256", data);
  return Array.from(new Uint8Array(hash))
    .map((b) => b.toString(16).padStart(2, "0"))
    .join("");
}

let digestIndex: Map<string, string> | null = null;

/**
 * Find the built-in world whose configuration digest matches.
 *
 * Returns null for unknown digests or when WebCrypto is unavailable; the
 * caller falls back to a generated palette.
 */
export async function matchWorldByDigest(digest: string): Promise<WorldDoc | null> {
  if (digestIndex === null) {
    const index = new Map<string, string>();
    try {
      for (const name of Object.keys(CANONICAL)) {
        index.set(await sha256Hex(CANONICAL[name]), name);
      }
    } catch {
      return null;
    }
    digestIndex = index;
  }
  const name = digestIndex.get(digest);
  return name === undefined ? null : worldDoc(name);
}
